//! Standalone SVG charts drawn from a fit archive.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::archive::{FitArchive, SummaryTable};
use crate::spde::Lattice;
use crate::{Error, Result};

pub const PLOT_KINDS: [&str; 4] = ["hrofweek", "dayofweek", "annual", "spatial"];

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 170.0;
const MARGIN: f64 = 40.0;

/// Renders `what` for the archive in memory: `(file name, svg text)` pairs.
pub fn render(archive: &FitArchive, what: &str) -> Result<Vec<(String, String)>> {
    match what {
        "hrofweek" => Ok(vec![("hrofweek.svg".into(), panels(archive, Shape::Line, |a| &a.trend_all, |a| &a.trend_sites))]),
        "dayofweek" => Ok(vec![("dayofweek.svg".into(), panels(archive, Shape::Step, |a| &a.dow_all, |a| &a.dow_sites))]),
        "annual" => {
            let mut svg = Svg::new(PANEL_W + 2.0 * MARGIN, PANEL_H + 2.0 * MARGIN);
            svg.series_panel(MARGIN, MARGIN, "Annual effect", &archive.annual, Shape::Line);
            Ok(vec![("annual.svg".into(), svg.finish())])
        }
        "spatial" => {
            let spatial = archive
                .spatial
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec("archive has no spatial effect".into()))?;
            Ok(vec![
                ("spatial_mean.svg".into(), heat_map(&spatial.mean, "Spatial effect: posterior mean")),
                ("spatial_sd.svg".into(), heat_map(&spatial.sd, "Spatial effect: posterior sd")),
            ])
        }
        other => Err(Error::UnknownPlotKind(other.to_string())),
    }
}

/// Reads the archive in `archive_dir` and writes the charts for `what` into
/// `out_dir`.
pub fn plot_command(archive_dir: &Path, what: &str, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if !PLOT_KINDS.contains(&what) {
        return Err(Error::UnknownPlotKind(what.to_string()));
    }
    let archive = FitArchive::read(archive_dir)?;
    let files = render(&archive, what)?;
    fs::create_dir_all(out_dir)?;
    files
        .into_iter()
        .map(|(name, text)| {
            let path = out_dir.join(name);
            fs::write(&path, text)?;
            Ok(path)
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Shape {
    Line,
    Step,
}

/// All-sites panel followed by one panel per site, two per row.
fn panels(
    archive: &FitArchive,
    shape: Shape,
    all: impl Fn(&FitArchive) -> &SummaryTable,
    sites: impl Fn(&FitArchive) -> &Vec<SummaryTable>,
) -> String {
    let mut tables = vec![("All sites".to_string(), all(archive))];
    for (site, t) in archive.metadata.sites.iter().zip(sites(archive)) {
        tables.push((format!("Site {site}"), t));
    }
    let cols = if tables.len() > 1 { 2 } else { 1 };
    let rows = tables.len().div_ceil(cols);
    let (cell_w, cell_h) = (PANEL_W + 2.0 * MARGIN, PANEL_H + 2.0 * MARGIN);
    let mut svg = Svg::new(cols as f64 * cell_w, rows as f64 * cell_h);
    for (k, (title, table)) in tables.iter().enumerate() {
        let (x, y) = ((k % cols) as f64 * cell_w + MARGIN, (k / cols) as f64 * cell_h + MARGIN);
        svg.series_panel(x, y, title, table, shape);
    }
    svg.finish()
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" \
             font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\">{}</text>",
            escape(content)
        );
    }

    /// Mean curve with a shaded 95% band in a `PANEL_W × PANEL_H` box whose
    /// top-left corner is `(x0, y0)`.
    fn series_panel(&mut self, x0: f64, y0: f64, title: &str, table: &SummaryTable, shape: Shape) {
        let n = table.len();
        let lo = table.rows.iter().map(|r| r.lower()).fold(f64::INFINITY, f64::min);
        let hi = table.rows.iter().map(|r| r.upper()).fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0) };
        // step charts give every value a unit-wide interval
        let span = match shape {
            Shape::Line => n.saturating_sub(1).max(1) as f64,
            Shape::Step => n.max(1) as f64,
        };
        let sx = |t: f64| x0 + PANEL_W * t / span;
        let sy = |v: f64| y0 + PANEL_H * (hi - v) / (hi - lo);

        let mut upper = Vec::new();
        let mut lower = Vec::new();
        let mut centre = Vec::new();
        for (i, r) in table.rows.iter().enumerate() {
            let xs = match shape {
                Shape::Line => vec![i as f64],
                Shape::Step => vec![i as f64, i as f64 + 1.0],
            };
            for t in xs {
                upper.push((sx(t), sy(r.upper())));
                lower.push((sx(t), sy(r.lower())));
                centre.push((sx(t), sy(r.mean)));
            }
        }
        let _ = writeln!(
            self.body,
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{PANEL_W:.1}\" height=\"{PANEL_H:.1}\" fill=\"none\" stroke=\"#444\"/>"
        );
        if lo < 0.0 && hi > 0.0 {
            let _ = writeln!(
                self.body,
                "<line x1=\"{x0:.1}\" y1=\"{y:.2}\" x2=\"{x1:.1}\" y2=\"{y:.2}\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>",
                y = sy(0.0),
                x1 = x0 + PANEL_W
            );
        }
        let band: Vec<_> = upper.iter().chain(lower.iter().rev()).collect();
        let _ = writeln!(
            self.body,
            "<polygon points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\"/>",
            points(band.into_iter())
        );
        let _ = writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.2\"/>",
            points(centre.iter())
        );
        self.text(x0 + PANEL_W / 2.0, y0 - 8.0, "middle", title);
        self.text(x0 - 4.0, y0 + 4.0, "end", &format!("{hi:.2}"));
        self.text(x0 - 4.0, y0 + PANEL_H, "end", &format!("{lo:.2}"));
        self.text(x0, y0 + PANEL_H + 14.0, "start", "1");
        self.text(x0 + PANEL_W, y0 + PANEL_H + 14.0, "end", &n.to_string());
        self.text(x0 + PANEL_W / 2.0, y0 + PANEL_H + 14.0, "middle", &table.key);
    }
}

fn points<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in pts {
        let _ = write!(s, "{x:.2},{y:.2} ");
    }
    s.pop();
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue-white-red ramp on `t ∈ [0, 1]`.
fn colour(t: f64) -> String {
    let stops = [(49.0, 54.0, 149.0), (247.0, 247.0, 247.0), (165.0, 0.0, 38.0)];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let k = (t.floor() as usize).min(1);
    let f = t - k as f64;
    let (a, b) = (stops[k], stops[k + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn heat_map(lattice: &Lattice, title: &str) -> String {
    let side = 360.0;
    let (nx, ny) = (lattice.nx as f64, lattice.ny as f64);
    let (cw, ch) = (side / nx, side / ny);
    let present = lattice.values.iter().flatten();
    let lo = present.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = present.copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let mut svg = Svg::new(side + 2.0 * MARGIN + 60.0, side + 2.0 * MARGIN);
    for j in 0..lattice.ny {
        for i in 0..lattice.nx {
            if let Some(v) = lattice.get(i, j) {
                // row 0 is the southern edge
                let _ = writeln!(
                    svg.body,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cw:.2}\" height=\"{ch:.2}\" fill=\"{}\"/>",
                    MARGIN + i as f64 * cw,
                    MARGIN + (ny - 1.0 - j as f64) * ch,
                    colour((v - lo) / range)
                );
            }
        }
    }
    let _ = writeln!(
        svg.body,
        "<rect x=\"{MARGIN:.1}\" y=\"{MARGIN:.1}\" width=\"{side:.1}\" height=\"{side:.1}\" fill=\"none\" stroke=\"#444\"/>"
    );
    let bar_x = MARGIN + side + 15.0;
    for k in 0..50 {
        let t = 1.0 - k as f64 / 49.0;
        let _ = writeln!(
            svg.body,
            "<rect x=\"{bar_x:.1}\" y=\"{:.2}\" width=\"12\" height=\"{:.2}\" fill=\"{}\"/>",
            MARGIN + k as f64 * side / 50.0,
            side / 50.0 + 0.5,
            colour(t)
        );
    }
    svg.text(bar_x + 16.0, MARGIN + 8.0, "start", &format!("{hi:.3}"));
    svg.text(bar_x + 16.0, MARGIN + side, "start", &format!("{lo:.3}"));
    svg.text(MARGIN + side / 2.0, MARGIN - 10.0, "middle", title);
    svg.text(MARGIN, MARGIN + side + 14.0, "start", &format!("{:.4}", lattice.lower[0]));
    svg.text(MARGIN + side, MARGIN + side + 14.0, "end", &format!("{:.4}", lattice.upper[0]));
    svg.finish()
}
