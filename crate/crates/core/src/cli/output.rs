//! CSV rows, SVG portraits and atomic file writes.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::rotation::SweepRow;
use crate::vecgeo::Point;

pub fn csv_header(dim: usize) -> String {
    let mut cols: Vec<String> = (1..dim).map(|i| format!("h{i}")).collect();
    cols.extend((1..=dim).map(|i| format!("seed{i}")));
    cols.extend(
        ["T", "tau", "rho", "m", "res_mu", "res_X", "res_V", "status"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

pub fn csv_line(row: &SweepRow) -> String {
    let mut cols: Vec<String> = row.h.iter().chain(&row.seed).map(|v| num(*v)).collect();
    cols.extend([num(row.period), num(row.tau), num(row.rho)]);
    cols.push(row.multiplicity.map_or(String::new(), |k| k.to_string()));
    cols.extend(
        [row.res_mu, row.res_x, row.res_v]
            .iter()
            .map(|r| residual(*r)),
    );
    cols.push(row.status.as_str().to_string());
    cols.join(",")
}

pub fn csv_table(dim: usize, rows: &[SweepRow]) -> String {
    let mut out = csv_header(dim);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.12}")
    }
}

fn residual(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.3e}")
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

/// A projected phase portrait: orbit curves, discrete orbit markers and
/// fixed points, in data coordinates.
#[derive(Debug, Default)]
pub struct Portrait {
    pub title: String,
    /// `[xmin, xmax, ymin, ymax]`.
    pub view: [f64; 4],
    pub curves: Vec<Vec<[f64; 2]>>,
    pub markers: Vec<Vec<[f64; 2]>>,
    pub fixed_points: Vec<[f64; 2]>,
    pub skipped: Vec<(Point, String)>,
}

const SIZE: f64 = 800.0;
const PAD: f64 = 40.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

impl Portrait {
    fn to_px(&self, p: [f64; 2]) -> [f64; 2] {
        let [x0, x1, y0, y1] = self.view;
        let w = SIZE - 2.0 * PAD;
        [
            PAD + (p[0] - x0) / (x1 - x0) * w,
            SIZE - PAD - (p[1] - y0) / (y1 - y0) * w,
        ]
    }

    fn visible(&self, p: [f64; 2]) -> bool {
        let [x0, x1, y0, y1] = self.view;
        let (sx, sy) = (0.05 * (x1 - x0), 0.05 * (y1 - y0));
        p[0].is_finite()
            && p[1].is_finite()
            && p[0] >= x0 - sx
            && p[0] <= x1 + sx
            && p[1] >= y0 - sy
            && p[1] <= y1 + sy
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(s, "<!-- {} -->", escape(&self.title));
        if !self.skipped.is_empty() {
            let _ = writeln!(s, "<!-- skipped seeds:");
            for (p, why) in &self.skipped {
                let coords: Vec<String> = p.iter().map(|c| format!("{c:.6}")).collect();
                let _ = writeln!(
                    s,
                    "  ({}) {}",
                    coords.join(", "),
                    escape(why).replace("--", "- -")
                );
            }
            let _ = writeln!(s, "-->");
        }
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let frame0 = self.to_px([self.view[0], self.view[3]]);
        let frame1 = self.to_px([self.view[1], self.view[2]]);
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#888"/>"##,
            frame0[0],
            frame0[1],
            frame1[0] - frame0[0],
            frame1[1] - frame0[1]
        );
        let _ = writeln!(
            s,
            r#"<text x="{PAD}" y="{:.0}" font-family="sans-serif" font-size="14">{}</text>"#,
            PAD * 0.6,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<clipPath id="frame"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath>"#,
            frame0[0],
            frame0[1],
            frame1[0] - frame0[0],
            frame1[1] - frame0[1]
        );
        s.push_str("<g clip-path=\"url(#frame)\">\n");
        for (i, c) in self.curves.iter().enumerate() {
            let d = self.path_data(c);
            if !d.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
                    PALETTE[i % PALETTE.len()]
                );
            }
        }
        for (i, pts) in self.markers.iter().enumerate() {
            for &p in pts.iter().filter(|&&p| self.visible(p)) {
                let q = self.to_px(p);
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
                    q[0],
                    q[1],
                    PALETTE[i % PALETTE.len()]
                );
            }
        }
        for &p in self.fixed_points.iter().filter(|&&p| self.visible(p)) {
            let q = self.to_px(p);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="black"/>"#,
                q[0] - 3.0,
                q[1] - 3.0
            );
        }
        s.push_str("</g>\n</svg>\n");
        s
    }

    // Breaks the polyline wherever it leaves the view.
    fn path_data(&self, pts: &[[f64; 2]]) -> String {
        let mut d = String::new();
        let mut pen_down = false;
        for &p in pts {
            if !self.visible(p) {
                pen_down = false;
                continue;
            }
            let q = self.to_px(p);
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if pen_down { "L" } else { "M" },
                q[0],
                q[1]
            );
            pen_down = true;
        }
        d.trim_end().to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
