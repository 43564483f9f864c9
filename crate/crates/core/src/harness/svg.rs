use std::fmt::Write;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::targets::Target;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 30.0;
const GRID: usize = 120;
/// Contour levels below the maximum log density.
const LEVELS: [f64; 5] = [0.5, 1.5, 3.0, 5.0, 8.0];

/// Planar scatter plot of a weighted ensemble over log-density contours.
/// Circle area is proportional to particle weight; reference samples, if
/// given, are drawn as small grey dots.
pub fn scatter_svg(target: &dyn Target, ensemble: &Ensemble, reference: Option<&Points>, title: &str) -> Result<String> {
    if target.dim() != 2 || ensemble.dim() != 2 {
        return Err(Error::Unsupported("SVG output needs a two-dimensional target".into()));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let all = ensemble.positions.rows().chain(reference.into_iter().flat_map(|r| r.rows()));
    for p in all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in 0..2 {
        let pad = 0.1 * (hi[k] - lo[k]).max(1e-6);
        lo[k] -= pad;
        hi[k] += pad;
    }
    let inner = SIZE - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - lo[0]) / (hi[0] - lo[0]) * inner;
    let sy = |y: f64| SIZE - MARGIN - (y - lo[1]) / (hi[1] - lo[1]) * inner;

    let step = [(hi[0] - lo[0]) / (GRID - 1) as f64, (hi[1] - lo[1]) / (GRID - 1) as f64];
    let mut field = vec![f64::NEG_INFINITY; GRID * GRID];
    for j in 0..GRID {
        for i in 0..GRID {
            let p = [lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]];
            field[j * GRID + i] = target.log_density(&p).unwrap_or(f64::NEG_INFINITY);
        }
    }
    let max = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    if max.is_finite() {
        for level in LEVELS {
            let segs = marching_squares(&field, max - level);
            if segs.is_empty() {
                continue;
            }
            let mut d = String::new();
            for ((x0, y0), (x1, y1)) in segs {
                let (ax, ay) = (lo[0] + x0 * step[0], lo[1] + y0 * step[1]);
                let (bx, by) = (lo[0] + x1 * step[0], lo[1] + y1 * step[1]);
                let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}", sx(ax), sy(ay), sx(bx), sy(by));
            }
            let _ = writeln!(out, r##"<path d="{d}" stroke="#7a9cc6" stroke-width="0.8" fill="none"/>"##);
        }
    }
    if let Some(reference) = reference {
        for p in reference.rows() {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="0.8" fill="#999"/>"##, sx(p[0]), sy(p[1]));
        }
    }
    let m = ensemble.len() as f64;
    for (p, a) in ensemble.positions.rows().zip(&ensemble.weights) {
        let r = 3.0 * (a * m).sqrt();
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="#d62728" fill-opacity="0.7" stroke="black" stroke-width="0.4"/>"##,
            sx(p[0]),
            sy(p[1])
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

type Segment = ((f64, f64), (f64, f64));

/// Iso-line segments of a `GRID x GRID` field (row-major in y), in grid
/// coordinates. Saddle cells are resolved by the cell-centre average.
fn marching_squares(field: &[f64], level: f64) -> Vec<Segment> {
    let at = |i: usize, j: usize| field[j * GRID + i];
    let mut segs = Vec::new();
    for j in 0..GRID - 1 {
        for i in 0..GRID - 1 {
            // corners counter-clockwise from bottom-left
            let v = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let c = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let inside: Vec<bool> = v.iter().map(|x| *x > level).collect();
            let cross = |e: usize| -> (f64, f64) {
                let (a, b) = (e, (e + 1) % 4);
                let t = if v[a].is_finite() && v[b].is_finite() && v[a] != v[b] {
                    ((level - v[a]) / (v[b] - v[a])).clamp(0.0, 1.0)
                } else {
                    0.5
                };
                (
                    i as f64 + c[a].0 + t * (c[b].0 - c[a].0),
                    j as f64 + c[a].1 + t * (c[b].1 - c[a].1),
                )
            };
            let edges: Vec<usize> = (0..4).filter(|&e| inside[e] != inside[(e + 1) % 4]).collect();
            match edges.len() {
                2 => segs.push((cross(edges[0]), cross(edges[1]))),
                4 => {
                    let centre = v.iter().sum::<f64>() / 4.0;
                    if (centre > level) == inside[0] {
                        segs.push((cross(0), cross(1)));
                        segs.push((cross(2), cross(3)));
                    } else {
                        segs.push((cross(3), cross(0)));
                        segs.push((cross(1), cross(2)));
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::GaussianTarget;

    #[test]
    fn renders_particles_and_contours() {
        let t = GaussianTarget::standard(2).unwrap();
        let ens = Ensemble::uniform(Points::from_rows(&[[-1.0, 0.0], [1.0, 0.5], [0.0, -1.0]]).unwrap()).unwrap();
        let svg = scatter_svg(&t, &ens, None, "a < b").unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("fill-opacity").count(), 3);
        assert!(svg.contains("<path"));
        assert!(svg.contains("a &lt; b"));
    }

    #[test]
    fn rejects_non_planar() {
        let t = GaussianTarget::standard(3).unwrap();
        let ens = Ensemble::uniform(Points::zeros(2, 3)).unwrap();
        assert!(scatter_svg(&t, &ens, None, "").is_err());
    }
}
