use birkhoff_core::csf::DiscreteCurve;
use birkhoff_core::geom::SurfaceMetric;

const SIZE: f64 = 400.0;
const COLORS: [&str; 4] = ["#888888", "#c0392b", "#2471a3", "#229954"];

/// Curves drawn in the fundamental domain of the chart.
pub fn curve_svg(m: &SurfaceMetric, curves: &[&DiscreteCurve]) -> String {
    let (pu, pv) = m.periods();
    let (v0, v1) = match pv {
        Some(p) => (0.0, p),
        None => (0.0, std::f64::consts::PI),
    };
    let sx = SIZE / pu;
    let sy = SIZE / (v1 - v0);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"none\" stroke=\"black\"/>\n"
    );
    for (i, c) in curves.iter().enumerate() {
        let mut d = String::new();
        let mut prev: Option<(f64, f64)> = None;
        for p in c.points.iter().chain(c.points.first()) {
            let x = p.u.rem_euclid(pu) * sx;
            let y = SIZE - (p.v - v0).rem_euclid(v1 - v0 + f64::EPSILON) * sy;
            let jump = prev.is_none_or(|(px, py)| (x - px).abs() > SIZE / 2.0 || (y - py).abs() > SIZE / 2.0);
            d.push_str(&format!("{}{x:.3},{y:.3} ", if jump { "M" } else { "L" }));
            prev = Some((x, y));
        }
        s.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            d.trim_end(),
            COLORS[i % COLORS.len()]
        ));
    }
    s.push_str("</svg>\n");
    s
}
