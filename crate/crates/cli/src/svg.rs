//! Self-contained SVG plots: convergence curves and field-map rasters.
//!
//! Output is a pure function of the data (fixed-precision coordinates, no
//! timestamps), so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use elastmap_core::{Error, Result};

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Smallest value plotted on a log axis; zeros clamp here.
const LOG_FLOOR: f64 = 1e-16;

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

/// Multi-series line chart. On a log axis non-positive values clamp to
/// [`LOG_FLOOR`] and series without a single finite point are skipped.
/// Points get circle markers while the series is small enough to count.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series<'_>],
    log_y: bool,
) -> Result<()> {
    let clamp = |y: f64| if log_y { y.max(LOG_FLOOR) } else { y };
    let drawn: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| (x, clamp(y)))
                .collect();
            (s.name, pts)
        })
        .filter(|(_, pts)| !pts.is_empty())
        .collect();
    if drawn.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }

    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for (_, pts) in &drawn {
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x0 == x1 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let (ty0, ty1) = if log_y {
        let lo = y0.log10().floor();
        let hi = y1.log10().ceil();
        if lo == hi {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        }
    } else if y0 == y1 {
        (y0 - 0.5, y1 + 0.5)
    } else {
        (y0, y1)
    };
    let ty = |y: f64| if log_y { y.log10() } else { y };

    let f = Frame {
        left: 72.0,
        right: 860.0,
        top: 46.0,
        bottom: 508.0,
    };
    let sx = |x: f64| f.left + (x - x0) / (x1 - x0) * (f.right - f.left);
    let sy = |y: f64| f.bottom - (ty(y) - ty0) / (ty1 - ty0) * (f.bottom - f.top);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="880" height="560" viewBox="0 0 880 560" font-family="sans-serif">"##
    );
    let _ = writeln!(out, r##"<rect width="880" height="560" fill="white"/>"##);
    let _ = writeln!(
        out,
        r##"<text x="440" y="24" text-anchor="middle" font-size="16">{}</text>"##,
        escape(title)
    );

    // gridlines and tick labels
    for (gy, label) in y_ticks(ty0, ty1, log_y) {
        let py = f.bottom - (gy - ty0) / (ty1 - ty0) * (f.bottom - f.top);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/>"##,
            f.left, f.right
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{label}</text>"##,
            f.left - 6.0,
            py + 4.0
        );
    }
    for (gx, label) in x_ticks(x0, x1) {
        let px = sx(gx);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            f.top, f.bottom
        );
        let _ = writeln!(
            out,
            r##"<text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="11">{label}</text>"##,
            f.bottom + 16.0
        );
    }
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
        f.left,
        f.top,
        f.right - f.left,
        f.bottom - f.top
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"##,
        (f.left + f.right) / 2.0,
        f.bottom + 36.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r##"<text x="16" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {:.2})">{}</text>"##,
        (f.top + f.bottom) / 2.0,
        (f.top + f.bottom) / 2.0,
        escape(y_label)
    );

    for (i, (name, pts)) in drawn.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut coords = String::new();
        for &(x, y) in pts {
            let _ = write!(coords, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##,
            coords.trim_end()
        );
        if pts.len() <= 400 {
            for &(x, y) in pts {
                let _ = writeln!(
                    out,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"##,
                    sx(x),
                    sy(y)
                );
            }
        }
        // legend entry
        let lx = f.left + 8.0 + 150.0 * i as f64;
        let _ = writeln!(
            out,
            r##"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{color}"/>"##,
            f.top + 8.0
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"##,
            lx + 16.0,
            f.top + 18.0,
            escape(name)
        );
    }
    let _ = writeln!(out, "</svg>");
    std::fs::write(path, out)?;
    Ok(())
}

fn y_ticks(t0: f64, t1: f64, log_y: bool) -> Vec<(f64, String)> {
    if log_y {
        let mut v = Vec::new();
        let mut d = t0 as i64;
        while (d as f64) <= t1 {
            v.push((d as f64, format!("1e{d}")));
            d += 1;
        }
        if v.len() > 12 {
            let stride = v.len().div_ceil(12);
            v = v.into_iter().step_by(stride).collect();
        }
        v
    } else {
        (0..=4)
            .map(|i| {
                let y = t0 + (t1 - t0) * i as f64 / 4.0;
                (y, trim_float(y))
            })
            .collect()
    }
}

fn x_ticks(x0: f64, x1: f64) -> Vec<(f64, String)> {
    (0..=5)
        .map(|i| {
            let x = x0 + (x1 - x0) * i as f64 / 5.0;
            (x, trim_float(x))
        })
        .collect()
}

fn trim_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One filled square per raster cell, row 0 at the bottom, plus a color bar.
/// The pixel grid matches the raster dimensions exactly.
pub fn field_map(path: &Path, title: &str, raster: &Array2<f64>) -> Result<()> {
    let (ny, nx) = raster.dim();
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("empty raster"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in raster.iter() {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return Err(Error::invalid("raster has no finite values"));
    }
    let t_of = |v: f64| {
        if !v.is_finite() {
            return None;
        }
        Some(if hi == lo { 0.5 } else { (v - lo) / (hi - lo) })
    };

    let side = 500.0;
    let cell = side / nx.max(ny) as f64;
    let (w, h) = (nx as f64 * cell, ny as f64 * cell);
    let (ox, oy) = (48.0, 64.0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="680" height="620" viewBox="0 0 680 620" font-family="sans-serif">"##
    );
    let _ = writeln!(out, r##"<rect width="680" height="620" fill="white"/>"##);
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="32" text-anchor="middle" font-size="16">{}</text>"##,
        ox + w / 2.0,
        escape(title)
    );
    // integer-unit cells under a flip-and-scale transform keep edges crisp
    let _ = writeln!(
        out,
        r##"<g shape-rendering="crispEdges" transform="translate({ox:.2},{:.2}) scale({cell:.4},-{cell:.4})">"##,
        oy + h
    );
    for r in 0..ny {
        for c in 0..nx {
            let color = match t_of(raster[[r, c]]) {
                Some(t) => viridis(t),
                None => "#bbbbbb".to_string(),
            };
            let _ = writeln!(out, r##"<rect x="{c}" y="{r}" width="1" height="1" fill="{color}"/>"##);
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r##"<rect x="{ox:.2}" y="{oy:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#333333"/>"##
    );

    // color bar, low at the bottom
    let (bx, bw, bh) = (600.0, 24.0, h);
    let strips = 64usize;
    let _ = writeln!(out, r##"<g shape-rendering="crispEdges">"##);
    for i in 0..strips {
        let t = (i as f64 + 0.5) / strips as f64;
        let y = oy + bh - (i + 1) as f64 * bh / strips as f64;
        let _ = writeln!(
            out,
            r##"<rect x="{bx:.2}" y="{y:.2}" width="{bw:.2}" height="{:.2}" fill="{}"/>"##,
            bh / strips as f64 + 0.5,
            viridis(t)
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r##"<rect x="{bx:.2}" y="{oy:.2}" width="{bw:.2}" height="{bh:.2}" fill="none" stroke="#333333"/>"##
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"##,
        bx + bw + 6.0,
        oy + bh + 4.0,
        value_label(lo)
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"##,
        bx + bw + 6.0,
        oy + 10.0,
        value_label(hi)
    );
    let _ = writeln!(out, "</svg>");
    std::fs::write(path, out)?;
    Ok(())
}

fn value_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        trim_float(v)
    } else {
        format!("{v:.3e}")
    }
}

/// Five-stop approximation of the usual perceptually uniform colormap.
fn viridis(t: f64) -> String {
    const STOPS: [[f64; 3]; 5] = [
        [0.267, 0.005, 0.329],
        [0.229, 0.322, 0.545],
        [0.128, 0.567, 0.551],
        [0.369, 0.789, 0.383],
        [0.993, 0.906, 0.144],
    ];
    let t = t.clamp(0.0, 1.0) * 4.0;
    let i = (t.floor() as usize).min(3);
    let f = t - i as f64;
    let mix = |a: f64, b: f64| a + (b - a) * f;
    let to_byte = |x: f64| (x * 255.0).round().clamp(0.0, 255.0) as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        to_byte(mix(STOPS[i][0], STOPS[i + 1][0])),
        to_byte(mix(STOPS[i][1], STOPS[i + 1][1])),
        to_byte(mix(STOPS[i][2], STOPS[i + 1][2]))
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_plots_one_marker_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.svg");
        let series = [Series {
            name: "loss",
            points: vec![(0.0, 1.0), (100.0, 0.1), (200.0, 0.01)],
        }];
        line_chart(&p, "t", "iteration", "loss", &series, true).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.matches("<circle").count(), 3);
        assert_eq!(text.matches("<polyline").count(), 1);
    }

    #[test]
    fn chart_is_byte_identical_on_rerun() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        let series = [
            Series {
                name: "x",
                points: vec![(0.0, 3.0), (1.0, 0.0)],
            },
            Series {
                name: "y",
                points: vec![(0.0, 2.0), (1.0, 1.0)],
            },
        ];
        line_chart(&a, "t", "i", "v", &series, true).unwrap();
        line_chart(&b, "t", "i", "v", &series, true).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn log_axis_clamps_zeros_instead_of_failing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.svg");
        let series = [Series {
            name: "flat",
            points: vec![(0.0, 0.0), (1.0, 0.0)],
        }];
        line_chart(&p, "t", "i", "v", &series, true).unwrap();
        assert!(p.exists());
    }

    #[test]
    fn map_has_one_rect_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.svg");
        let raster = ndarray::Array2::from_shape_fn((3, 4), |(r, c)| (r * 4 + c) as f64);
        field_map(&p, "m", &raster).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let cells = text
            .lines()
            .filter(|l| l.contains("width=\"1\" height=\"1\""))
            .count();
        assert_eq!(cells, 12);
    }

    #[test]
    fn constant_map_renders_mid_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.svg");
        let raster = ndarray::Array2::from_elem((2, 2), 7.0);
        field_map(&p, "k", &raster).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains(&viridis(0.5)));
    }
}
