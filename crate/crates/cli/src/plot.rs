//! Minimal SVG line plot of holes per simulation against burn-in `k`.

use std::fmt::Write;

use crate::HoleDecay;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

/// Empirical and expected hole counts on a log scale; zero counts are skipped.
pub fn hole_decay_svg(points: &[HoleDecay]) -> String {
    let positive = points
        .iter()
        .flat_map(|p| [p.holes, p.holes_expected])
        .filter(|v| *v > 0.0);
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let (lo, hi) = if lo.is_finite() {
        (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0))
    } else {
        (-1.0, 0.0)
    };
    let k_max = points.iter().map(|p| p.k).max().unwrap_or(1).max(1) as f64;
    let x = |k: usize| PAD + (W - 2.0 * PAD) * k as f64 / k_max;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v.log10() - lo) / (hi - lo);
    let line = |get: &dyn Fn(&HoleDecay) -> f64| {
        points
            .iter()
            .filter(|p| get(p) > 0.0)
            .map(|p| format!("{:.2},{:.2}", x(p.k), y(get(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for e in lo as i32..=hi as i32 {
        let yy = y(10f64.powi(e));
        let _ = writeln!(
            s,
            r#"<text x="{tx}" y="{ty:.2}" text-anchor="end">1e{e}</text>"#,
            tx = PAD - 4.0,
            ty = yy + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{cx}" y="{ty}" text-anchor="middle">k (0 to {k_max})</text>"#,
        cx = W / 2.0,
        ty = H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#,
        line(&|p| p.holes_expected)
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        line(&|p| p.holes)
    );
    let _ = writeln!(
        s,
        r#"<text x="{lx}" y="{PAD}">holes per simulation (solid: observed, dashed: expected)</text>"#,
        lx = PAD + 10.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_both_curves() {
        let pts: Vec<_> = (0..5)
            .map(|k| HoleDecay {
                k,
                holes: if k < 4 { 1.0 / (k + 1) as f64 } else { 0.0 },
                holes_expected: 0.5f64.powi(k as i32),
            })
            .collect();
        let svg = hole_decay_svg(&pts);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
