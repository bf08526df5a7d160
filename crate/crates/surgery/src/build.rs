use crate::complex::{Complex, SideRef};
use crate::{CurveConfiguration, SurgeryError};

/// Boundary label: `(curve, sign)` with sign +1 for `γ̇` and −1 for `−γ̇`.
pub type Orbit = (usize, i8);

pub struct SurgeryComplex {
    pub complex: Complex<Orbit>,
    /// Number of hexagons each annulus over the curve is cut into; a boundary
    /// cycle covering the curve once consists of that many free sides.
    pub sides_per_loop: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    /// k-th intersection point with the other curve.
    Crossing { other: usize, k: u32 },
    Auxiliary,
}

/// Triangles of one hexagon `L0 R0 R1 R2 L2 L1`.
#[derive(Clone, Copy)]
struct Hex {
    t: [usize; 4],
}

impl Hex {
    fn bottom(&self) -> SideRef {
        SideRef { face: self.t[0], side: 0 }
    }
    fn top(&self) -> SideRef {
        SideRef { face: self.t[3], side: 1 }
    }
    /// Fiber segment on the right (`right == true`) or left edge; `upper`
    /// selects the segment between the middle and the top corner. Returns the
    /// side and whether it is traversed from its lower to its upper corner.
    fn fiber(&self, right: bool, upper: bool) -> (SideRef, bool) {
        match (right, upper) {
            (true, false) => (SideRef { face: self.t[0], side: 1 }, true),
            (true, true) => (SideRef { face: self.t[2], side: 1 }, true),
            (false, false) => (SideRef { face: self.t[1], side: 2 }, false),
            (false, true) => (SideRef { face: self.t[3], side: 2 }, false),
        }
    }
}

fn add_hexagon(c: &mut Complex<Orbit>) -> Hex {
    let t = [c.add_face(3), c.add_face(3), c.add_face(3), c.add_face(3)];
    // diagonals L0R1, L1R1, L1R2
    c.glue(SideRef { face: t[0], side: 2 }, SideRef { face: t[1], side: 0 }, true).unwrap();
    c.glue(SideRef { face: t[1], side: 1 }, SideRef { face: t[2], side: 0 }, true).unwrap();
    c.glue(SideRef { face: t[2], side: 2 }, SideRef { face: t[3], side: 0 }, true).unwrap();
    Hex { t }
}

fn events(cfg: &CurveConfiguration, i: usize) -> Vec<Event> {
    let mut ev = Vec::new();
    for j in 0..cfg.n {
        for k in 0..cfg.intersections[i][j] {
            ev.push(Event::Crossing { other: j, k });
        }
    }
    while ev.len() < 2 {
        ev.push(Event::Auxiliary);
    }
    ev
}

/// One copy of a fiber segment: which side of the cut it lies on and the
/// fiber labels of its lower and upper corner.
#[derive(Clone, Copy)]
struct Segment {
    side: SideRef,
    from: u8,
    to: u8,
}

fn segment(hex: &Hex, right: bool, upper: bool, labels: [u8; 3]) -> Segment {
    let (side, increasing) = hex.fiber(right, upper);
    let (lo, hi) = if upper { (labels[1], labels[2]) } else { (labels[0], labels[1]) };
    if increasing {
        Segment { side, from: lo, to: hi }
    } else {
        Segment { side, from: hi, to: lo }
    }
}

fn glue_segments(c: &mut Complex<Orbit>, a: Segment, b: Segment) -> Result<(), SurgeryError> {
    debug_assert!((a.from == b.from && a.to == b.to) || (a.from == b.to && a.to == b.from));
    c.glue(a.side, b.side, a.from != b.from)
        .map_err(|e| SurgeryError::NotAManifold(format!("{e:?}")))
}

/// Corner labels on the fiber circle over a crossing of `γ_i` (first) and
/// `γ_j` (second). Labels 0, 1, 2, 3 stand for the angles 0, α, π, α + π
/// measured from `γ̇_i`, where `γ̇_j` sits at α.
fn fiber_labels(first: bool, eps: i8) -> [u8; 3] {
    match (first, eps > 0) {
        (true, true) => [0, 1, 2],
        (true, false) => [2, 3, 0],
        (false, true) => [1, 2, 3],
        (false, false) => [3, 0, 1],
    }
}

/// Builds the polygonal complex of the surgered union of all annuli
/// `A(±γ̇_i)`.
pub fn fried_surgery_complex(cfg: &CurveConfiguration) -> Result<SurgeryComplex, SurgeryError> {
    cfg.validate()?;
    let mut c = Complex::new();
    let ev: Vec<Vec<Event>> = (0..cfg.n).map(|i| events(cfg, i)).collect();
    // hexes[i][s][a]: annulus over curve i with sign index s (0 for +, 1 for −)
    let mut hexes: Vec<[Vec<Hex>; 2]> = Vec::with_capacity(cfg.n);
    for (i, evs) in ev.iter().enumerate() {
        let mut pair: [Vec<Hex>; 2] = [Vec::new(), Vec::new()];
        for (s, eps) in [(0usize, 1i8), (1, -1)] {
            for _ in 0..evs.len() {
                let h = add_hexagon(&mut c);
                c.set_boundary_label(h.bottom(), (i, eps), 1);
                c.set_boundary_label(h.top(), (i, -eps), 1);
                pair[s].push(h);
            }
        }
        hexes.push(pair);
    }

    let sign_of = |s: usize| if s == 0 { 1i8 } else { -1 };

    for i in 0..cfg.n {
        let m = ev[i].len();
        for b in 0..m {
            // back copy: right edge of hexagon b−1; forward copy: left edge of b
            let prev = (b + m - 1) % m;
            match ev[i][b] {
                Event::Auxiliary => {
                    for s in 0..2 {
                        let (hb, hf) = (hexes[i][s][prev], hexes[i][s][b]);
                        for upper in [false, true] {
                            let back = segment(&hb, true, upper, [0, 1, 2]);
                            let fwd = segment(&hf, false, upper, [0, 1, 2]);
                            glue_segments(&mut c, back, fwd)?;
                        }
                    }
                }
                Event::Crossing { other: j, k } => {
                    if j < i {
                        continue;
                    }
                    let bj = ev[j]
                        .iter()
                        .position(|e| matches!(e, Event::Crossing { other, k: kk } if *other == i && *kk == k))
                        .expect("symmetric matrix");
                    let mj = ev[j].len();
                    let prev_j = (bj + mj - 1) % mj;
                    // (sign, back segment, forward segment) per annulus and per arc
                    let mut sheets: Vec<(i8, Segment, Segment)> = Vec::new();
                    for (curve, first, at, before) in [(i, true, b, prev), (j, false, bj, prev_j)] {
                        for s in 0..2 {
                            let labels = fiber_labels(first, sign_of(s));
                            let (hb, hf) = (hexes[curve][s][before], hexes[curve][s][at]);
                            for upper in [false, true] {
                                sheets.push((
                                    sign_of(s),
                                    segment(&hb, true, upper, labels),
                                    segment(&hf, false, upper, labels),
                                ));
                            }
                        }
                    }
                    for arc in 0u8..4 {
                        let ends = (arc, (arc + 1) % 4);
                        let on_arc: Vec<_> = sheets
                            .iter()
                            .filter(|(_, seg, _)| {
                                (seg.from, seg.to) == ends || (seg.to, seg.from) == ends
                            })
                            .copied()
                            .collect();
                        debug_assert_eq!(on_arc.len(), 2);
                        let (p, q) = (on_arc[0], on_arc[1]);
                        if p.0 != q.0 {
                            glue_segments(&mut c, p.2, q.2)?;
                            glue_segments(&mut c, p.1, q.1)?;
                        } else {
                            glue_segments(&mut c, p.2, q.1)?;
                            glue_segments(&mut c, p.1, q.2)?;
                        }
                    }
                }
            }
        }
    }
    Ok(SurgeryComplex { complex: c, sides_per_loop: ev.iter().map(|e| e.len()).collect() })
}
