use super::segment::label_components;
use super::{BitMask, BittingError};

/// Moore neighbours in counter-clockwise order as seen on screen (y down):
/// E, NE, N, NW, W, SW, S, SE.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

pub fn count_components(mask: &BitMask) -> usize {
    label_components(mask).1.len()
}

/// Traces the outer boundary of a single 4-connected component with Moore
/// neighbour tracing.
///
/// The cycle runs counter-clockwise on screen and starts at the left-most of
/// the top-most foreground pixels; consecutive pixels are 8-adjacent and the
/// start is not repeated at the end.
pub fn extract_boundary(mask: &BitMask) -> Result<Vec<(usize, usize)>, BittingError> {
    match count_components(mask) {
        0 => return Err(BittingError::EmptyMask),
        1 => {}
        n => return Err(BittingError::MultipleComponents(n)),
    }
    let w = mask.width();
    let start_idx = mask
        .bits()
        .iter()
        .position(|&b| b)
        .ok_or(BittingError::EmptyMask)?;
    let start = ((start_idx % w) as i64, (start_idx / w) as i64);

    // Everything above the start is background; begin the scan from north.
    let Some((first, first_back)) = step(mask, start, 2) else {
        return Ok(vec![(start.0 as usize, start.1 as usize)]);
    };

    let mut out = vec![(start.0 as usize, start.1 as usize)];
    let (mut cur, mut back) = (first, first_back);
    let limit = 4 * mask.width() * mask.height() + 8;
    loop {
        if cur == start {
            // Jacob's criterion: stop when the first move would repeat.
            if let Some((next, _)) = step(mask, cur, back) {
                if next == first {
                    break;
                }
            }
        } else {
            out.push((cur.0 as usize, cur.1 as usize));
        }
        let (next, nb) = step(mask, cur, back).expect("a traced pixel has a foreground neighbour");
        cur = next;
        back = nb;
        if out.len() > limit {
            unreachable!("boundary trace did not close");
        }
    }
    Ok(out)
}

/// From `p` with background neighbour in direction `back`, scans the Moore
/// ring counter-clockwise for the next foreground pixel. Returns it with the
/// direction from it to the last background pixel examined.
fn step(mask: &BitMask, p: (i64, i64), back: usize) -> Option<((i64, i64), usize)> {
    for i in 1..=8 {
        let d = (back + i) % 8;
        let q = (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
        if mask.get_signed(q.0, q.1) {
            let prev = (back + i - 1) % 8;
            let b = (p.0 + DIRS[prev].0, p.1 + DIRS[prev].1);
            let rel = (b.0 - q.0, b.1 - q.1);
            let nb = DIRS
                .iter()
                .position(|&dd| dd == rel)
                .expect("backtrack is 8-adjacent");
            return Some((q, nb));
        }
    }
    None
}
