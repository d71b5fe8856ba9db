//! The branch partition of `I_α`, cylinder sets via inverse branches,
//! full cylinders, and the inverse-derivative weights `g_{n,α}`.
//!
//! The one-step partition consists of the branch intervals
//! `I_j⁺ = (1/(j+α), 1/(j−1+α))` for `j ≥ j_min` and
//! `I_j⁻ = (−1/(j−1+α), −1/(j+α))` for `j ≥ 2`, with the outermost branch
//! on each side truncated at `α` resp. `α−1`. Everywhere in this crate a
//! branch cutoff `j_max` tracks the branches with index `j < j_max`; the
//! untracked tail clusters at 0 and has measure at most `2/(j_max−1)`.

use crate::map::{AlphaMap, Sign};
use crate::{Error, Result, ZERO_EPS};

/// Minimal positive width for a cylinder piece to count as nonempty.
const MIN_WIDTH: f64 = 1e-13;

/// Tolerance on image endpoints when testing fullness (`image = I_α`).
pub const FULLNESS_TOL: f64 = 1e-12;

/// Tolerance under which two image intervals count as the same.
pub const IMAGE_DEDUP_TOL: f64 = 1e-10;

/// An admissible branch `(j, ε)` of the one-step partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BranchId {
    pub j: u64,
    pub eps: Sign,
}

impl BranchId {
    pub fn new(j: u64, eps: Sign) -> Self {
        BranchId { j, eps }
    }
}

pub fn is_admissible(map: &AlphaMap, id: BranchId) -> bool {
    match id.eps {
        Sign::Pos => id.j >= map.j_min(),
        Sign::Neg => map.neg_j_min().is_some_and(|m| id.j >= m),
    }
}

/// All admissible branches with `j < j_max`, positive side first.
pub fn admissible_branches(map: &AlphaMap, j_max: u64) -> Vec<BranchId> {
    let mut out = Vec::new();
    for j in map.j_min()..j_max {
        out.push(BranchId::new(j, Sign::Pos));
    }
    if let Some(m) = map.neg_j_min() {
        for j in m..j_max {
            out.push(BranchId::new(j, Sign::Neg));
        }
    }
    out
}

/// The open interval on which the branch acts, truncated at the endpoint
/// of `I_α` for the outermost branch of each side.
pub fn branch_interval(map: &AlphaMap, id: BranchId) -> Result<(f64, f64)> {
    if !is_admissible(map, id) {
        return Err(Error::InadmissibleBranch {
            j: id.j,
            eps: id.eps,
            alpha: map.alpha(),
        });
    }
    let (a, j) = (map.alpha(), id.j as f64);
    Ok(match id.eps {
        Sign::Pos => (1.0 / (j + a), (1.0 / (j - 1.0 + a)).min(map.right())),
        Sign::Neg => ((-1.0 / (j - 1.0 + a)).max(map.left()), -1.0 / (j + a)),
    })
}

/// Whether the branch is the truncated boundary branch of its side.
pub fn branch_is_truncated(map: &AlphaMap, id: BranchId) -> bool {
    let (a, j) = (map.alpha(), id.j as f64);
    match id.eps {
        Sign::Pos => 1.0 / (j - 1.0 + a) > map.right(),
        Sign::Neg => 1.0 / (j - 1.0 + a) > -map.left(),
    }
}

/// `T_α(I_j)` in closed form: the full interval for interior branches,
/// `(T_α(endpoint), α]` for the truncated ones.
pub fn branch_image(map: &AlphaMap, id: BranchId) -> Result<(f64, f64)> {
    if !is_admissible(map, id) {
        return Err(Error::InadmissibleBranch {
            j: id.j,
            eps: id.eps,
            alpha: map.alpha(),
        });
    }
    if !branch_is_truncated(map, id) {
        return Ok((map.left(), map.right()));
    }
    let (a, j) = (map.alpha(), id.j as f64);
    let lo = match id.eps {
        Sign::Pos => 1.0 / a - j,
        Sign::Neg => 1.0 / (1.0 - a) - j,
    };
    Ok((lo.max(map.left()), map.right()))
}

/// `σ_{j,ε}(y) = ε/(y + j)`, the inverse of the branch restriction,
/// without a containment check.
pub fn inverse_branch_raw(id: BranchId, y: f64) -> f64 {
    id.eps.as_f64() / (y + id.j as f64)
}

/// The inverse branch, rejecting points whose preimage falls outside the
/// branch interval (i.e. `y` outside the branch image).
pub fn inverse_branch(map: &AlphaMap, id: BranchId, y: f64) -> Result<f64> {
    if !map.contains(y) {
        return Err(Error::OutsideInterval {
            x: y,
            left: map.left(),
            right: map.right(),
        });
    }
    let x = inverse_branch_raw(id, y);
    let (lo, hi) = branch_interval(map, id)?;
    if x < lo - FULLNESS_TOL || x > hi + FULLNESS_TOL {
        return Err(Error::OutsideBranch {
            x,
            j: id.j,
            eps: id.eps,
        });
    }
    Ok(x)
}

/// `|σ′_{j,ε}(y)| = 1/(y + j)²`.
pub fn inverse_branch_derivative(id: BranchId, y: f64) -> f64 {
    let t = y + id.j as f64;
    1.0 / (t * t)
}

/// Image of a subinterval of the branch under the branch restriction
/// (decreasing on positive branches, increasing on negative ones).
fn forward_interval(id: BranchId, lo: f64, hi: f64) -> (f64, f64) {
    let j = id.j as f64;
    let t = |x: f64| 1.0 / x.abs() - j;
    match id.eps {
        Sign::Pos => (t(hi), t(lo)),
        Sign::Neg => (t(lo), t(hi)),
    }
}

/// A length-`n` cylinder: the digit word, its interval, its `n`-step image
/// and whether that image is all of `I_α`.
#[derive(Clone, Debug)]
pub struct Cylinder {
    pub word: Vec<BranchId>,
    pub interval: (f64, f64),
    pub image: (f64, f64),
    pub full: bool,
}

fn intersect(a: (f64, f64), b: (f64, f64)) -> Option<(f64, f64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (hi - lo > MIN_WIDTH).then_some((lo, hi))
}

/// Enumerates the cylinders of the `n`-step partition over branches with
/// index `j < j_max`, word-based: prefix images are tracked forward and
/// each leaf interval is reassembled by composing inverse branches, which
/// avoids subtractive cancellation at small cylinders.
pub fn cylinders(map: &AlphaMap, n: usize, j_max: u64) -> Result<Vec<Cylinder>> {
    if n == 0 {
        return Err(Error::InvalidParam("cylinder depth n must be >= 1".into()));
    }
    if j_max < map.j_min() + 2 {
        return Err(Error::InvalidParam(format!(
            "j_max = {j_max} leaves no branches (j_min = {})",
            map.j_min()
        )));
    }
    let branches = admissible_branches(map, j_max);
    let mut out = Vec::new();
    let mut word: Vec<BranchId> = Vec::with_capacity(n);
    // Each stack frame is the image interval of the current prefix.
    fn recurse(
        map: &AlphaMap,
        branches: &[BranchId],
        word: &mut Vec<BranchId>,
        prefix_image: (f64, f64),
        n: usize,
        out: &mut Vec<Cylinder>,
    ) {
        for &b in branches {
            let bi = branch_interval(map, b).expect("admissible");
            let Some(piece) = intersect(bi, prefix_image) else {
                continue;
            };
            let image = forward_interval(b, piece.0, piece.1);
            word.push(b);
            if word.len() == n {
                // Pull the piece back through the prefix, innermost first.
                let (mut lo, mut hi) = piece;
                for id in word[..n - 1].iter().rev() {
                    let (a, b2) = (inverse_branch_raw(*id, lo), inverse_branch_raw(*id, hi));
                    lo = a.min(b2);
                    hi = a.max(b2);
                }
                let full = (image.0 - map.left()).abs() <= FULLNESS_TOL
                    && (image.1 - map.right()).abs() <= FULLNESS_TOL;
                out.push(Cylinder {
                    word: word.clone(),
                    interval: (lo, hi),
                    image,
                    full,
                });
            } else {
                recurse(map, branches, word, image, n, out);
            }
            word.pop();
        }
    }
    recurse(
        map,
        &branches,
        &mut word,
        (map.left(), map.right()),
        n,
        &mut out,
    );
    Ok(out)
}

fn dedup_intervals(xs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for x in xs {
        if !out
            .iter()
            .any(|y| (x.0 - y.0).abs() <= IMAGE_DEDUP_TOL && (x.1 - y.1).abs() <= IMAGE_DEDUP_TOL)
        {
            out.push(x);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Number of distinct `n`-step cylinder images, which the partition
/// structure keeps at most `2n + 1`.
pub fn image_count(map: &AlphaMap, n: usize, j_max: u64) -> Result<usize> {
    Ok(distinct_images(map, n, j_max)?.len())
}

/// The distinct `n`-step images.
///
/// A cylinder extended by a branch whose one-step image covers it keeps
/// its image, so every level inherits the previous level's images and
/// only the (at most two) truncated branches create new ones: the new
/// image at level `k` is cut at `T^{k−1}` of the truncated branch's image
/// endpoint. Tracking the forward orbits of those two cut points and the
/// word image along them enumerates all images in `O(n)` per level, with
/// no word enumeration.
pub fn distinct_images(map: &AlphaMap, n: usize, j_max: u64) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::InvalidParam("image depth n must be >= 1".into()));
    }
    let whole = (map.left(), map.right());
    let mut images = vec![whole];

    // the truncated boundary branch of each side, if any
    let mut cut_points: Vec<f64> = Vec::new();
    let mut boundary = vec![BranchId::new(map.j_min(), Sign::Pos)];
    if let Some(m) = map.neg_j_min() {
        boundary.push(BranchId::new(m, Sign::Neg));
    }
    for b in boundary {
        if b.j < j_max && branch_is_truncated(map, b) {
            let img = branch_image(map, b).expect("admissible");
            images.push(img);
            cut_points.push(img.0);
        }
    }

    // Follow each cut point: at level k it generates the image of the
    // piece it cuts out of its own cylinder, whose other endpoint comes
    // from the cylinder's image with orientation tracked through the word.
    for cut in cut_points {
        let mut x = cut;
        let mut word_image = whole;
        let mut increasing = true;
        for _ in 2..=n {
            // degenerate alignment: the cut orbit hit a partition point,
            // all further pieces are unions of whole cylinders
            if x.abs() <= crate::ZERO_EPS || x == map.left() || x == map.right() {
                break;
            }
            let t = 1.0 / x.abs() + 1.0 - map.alpha();
            if t == t.floor() {
                break;
            }
            let Ok(d) = map.digit(x) else { break };
            let b = BranchId::new(d.a, d.eps);
            let bi = branch_interval(map, b).expect("admissible");
            let Some(piece) = intersect(bi, word_image) else {
                break;
            };
            word_image = forward_interval(b, piece.0, piece.1);
            increasing ^= d.eps == Sign::Pos;
            x = map.step(x).expect("in interval");
            let new_image = if increasing {
                (x, word_image.1)
            } else {
                (word_image.0, x)
            };
            if new_image.1 - new_image.0 > MIN_WIDTH {
                images.push(new_image);
            }
        }
    }
    Ok(dedup_intervals(images))
}

/// Evaluates `g_{n,α}(x) = 1/|(T_α^n)′(x)| = ∏_{k<n} (T_α^k x)²` by the
/// chain rule along the orbit.
///
/// The partition definition puts 0 on branch endpoints; that convention
/// is applied when the evaluation point itself sits on one (or on
/// `{α−1, 0, α}`). Later orbit points passing through endpoints keep the
/// chain-rule value, which is the representative the one-sided limits
/// select there.
pub fn weight(map: &AlphaMap, n: usize, x: f64) -> Result<f64> {
    if !map.contains(x) {
        return Err(Error::OutsideInterval {
            x,
            left: map.left(),
            right: map.right(),
        });
    }
    if n == 0 {
        return Ok(1.0);
    }
    if x.abs() <= ZERO_EPS || x == map.left() || x == map.right() {
        return Ok(0.0);
    }
    let t = 1.0 / x.abs() + 1.0 - map.alpha();
    if t == t.floor() {
        return Ok(0.0); // exactly on a branch endpoint
    }
    let mut cur = x;
    let mut prod = 1.0;
    for _ in 0..n {
        if cur.abs() <= ZERO_EPS {
            return Ok(0.0);
        }
        prod *= cur * cur;
        cur = map.step(cur)?;
    }
    Ok(prod)
}

/// Uniform sup bound for `g_{n,α}`: `γ_α^n` for `α < 1`, and the golden
/// mean bound `4·((√5−1)/2)^{2n−4}` for `α = 1` where `γ = 1`.
pub fn weight_sup_bound(map: &AlphaMap, n: usize) -> f64 {
    if map.alpha() < 1.0 {
        map.gamma().powi(n as i32)
    } else {
        4.0 * crate::GOLDEN_MEAN.powi(2 * n as i32 - 4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn branch_interval_examples() {
        // Sign-corrected truncated negative branch at α = 0.5.
        let half = AlphaMap::new(0.5).unwrap();
        let (lo, hi) = branch_interval(&half, BranchId::new(2, Sign::Neg)).unwrap();
        assert_abs_diff_eq!(lo, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, -0.4, epsilon = 1e-15);

        let gauss = AlphaMap::new(1.0).unwrap();
        let (lo, hi) = branch_interval(&gauss, BranchId::new(2, Sign::Pos)).unwrap();
        assert_abs_diff_eq!(lo, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.5, epsilon = 1e-15);

        // Truncated positive branch at α = 0.3, consistent with digit(0.29) = 4.
        let m = AlphaMap::new(0.3).unwrap();
        let (lo, hi) = branch_interval(&m, BranchId::new(4, Sign::Pos)).unwrap();
        assert_abs_diff_eq!(lo, 1.0 / 4.3, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.3, epsilon = 1e-15);
        assert!(lo < 0.29 && 0.29 < hi);
        assert_eq!(m.digit(0.29).unwrap().a, 4);

        assert!(branch_interval(&m, BranchId::new(2, Sign::Pos)).is_err());
        assert!(branch_interval(&gauss, BranchId::new(2, Sign::Neg)).is_err());
    }

    #[test]
    fn branch_intervals_disjoint_and_digit_consistent() {
        for alpha in [0.2, 0.5, 0.7, 1.0] {
            let m = AlphaMap::new(alpha).unwrap();
            let branches = admissible_branches(&m, 60);
            for (k, &b) in branches.iter().enumerate() {
                let (lo, hi) = branch_interval(&m, b).unwrap();
                assert!(lo < hi, "empty branch {b:?} at alpha={alpha}");
                // interior point carries the branch digit
                let mid = 0.5 * (lo + hi);
                let d = m.digit(mid).unwrap();
                assert_eq!((d.a, d.eps), (b.j, b.eps), "alpha={alpha} branch {b:?}");
                for &b2 in &branches[k + 1..] {
                    let (lo2, hi2) = branch_interval(&m, b2).unwrap();
                    assert!(hi <= lo2 + 1e-12 || hi2 <= lo + 1e-12);
                }
            }
        }
    }

    #[test]
    fn inverse_branch_examples() {
        let gauss = AlphaMap::new(1.0).unwrap();
        let x = inverse_branch(&gauss, BranchId::new(2, Sign::Pos), 0.0).unwrap();
        assert_abs_diff_eq!(x, 0.5, epsilon = 1e-15);

        let half = AlphaMap::new(0.5).unwrap();
        let x = inverse_branch(&half, BranchId::new(3, Sign::Neg), -0.5).unwrap();
        assert_abs_diff_eq!(x, -0.4, epsilon = 1e-15);

        assert!(inverse_branch(&gauss, BranchId::new(5, Sign::Pos), 2.0).is_err());
    }

    #[test]
    fn inverse_branch_round_trip() {
        // Oracle: step. 100 random (branch, y) pairs per alpha.
        for alpha in [0.3, 0.62, 0.85, 1.0] {
            let m = AlphaMap::new(alpha).unwrap();
            let branches = admissible_branches(&m, 30);
            let mut r = rng::stream(77, alpha.to_bits());
            let mut done = 0;
            while done < 100 {
                let b = branches[r.random_range(0..branches.len())];
                let (ilo, ihi) = branch_image(&m, b).unwrap();
                let y = ilo + (ihi - ilo) * r.random::<f64>();
                let Ok(x) = inverse_branch(&m, b, y) else {
                    continue;
                };
                assert_abs_diff_eq!(m.step(x).unwrap(), y, epsilon = 1e-9);
                let d = inverse_branch_derivative(b, y);
                assert_abs_diff_eq!(d, x * x, epsilon = 1e-12);
                done += 1;
            }
        }
    }

    #[test]
    fn branch_image_matches_forward_endpoints() {
        for alpha in [0.3, 0.5, 0.8, 1.0] {
            let m = AlphaMap::new(alpha).unwrap();
            for b in admissible_branches(&m, 40) {
                let (lo, hi) = branch_interval(&m, b).unwrap();
                let fwd = forward_interval(b, lo, hi);
                let img = branch_image(&m, b).unwrap();
                assert_abs_diff_eq!(fwd.0, img.0, epsilon = 1e-9);
                assert_abs_diff_eq!(fwd.1, img.1, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn cylinder_examples() {
        // Gauss map, one step: 49 cylinders (1/(j+1), 1/j), all full.
        let gauss = AlphaMap::new(1.0).unwrap();
        let cyls = cylinders(&gauss, 1, 50).unwrap();
        assert_eq!(cyls.len(), 49);
        assert!(cyls.iter().all(|c| c.full));

        // α = 0.5: both boundary branches truncated and not full, interior full.
        let half = AlphaMap::new(0.5).unwrap();
        let cyls = cylinders(&half, 1, 40).unwrap();
        for c in &cyls {
            let truncated = branch_is_truncated(&half, c.word[0]);
            assert_eq!(c.full, !truncated, "word {:?}", c.word);
        }
        assert_eq!(cyls.iter().filter(|c| !c.full).count(), 2);
    }

    #[test]
    fn two_step_cylinders_match_inverse_composition() {
        let m = AlphaMap::new(0.7).unwrap();
        let cyls = cylinders(&m, 2, 12).unwrap();
        assert!(!cyls.is_empty());
        for c in cyls.iter().take(200) {
            // definition of refinement: interval = σ_{b1}(I_{b2} ∩ image(b1))
            let (b1, b2) = (c.word[0], c.word[1]);
            let img1 = branch_image(&m, b1).unwrap();
            let i2 = branch_interval(&m, b2).unwrap();
            let piece = (i2.0.max(img1.0), i2.1.min(img1.1));
            assert!(piece.1 > piece.0);
            let (u, v) = (
                inverse_branch_raw(b1, piece.0),
                inverse_branch_raw(b1, piece.1),
            );
            let (lo, hi) = (u.min(v), u.max(v));
            assert_abs_diff_eq!(lo, c.interval.0, epsilon = 1e-12);
            assert_abs_diff_eq!(hi, c.interval.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn cylinders_disjoint_and_cover() {
        for alpha in [0.3, 0.7, 1.0] {
            let m = AlphaMap::new(alpha).unwrap();
            for (n, j_max) in [(1usize, 200u64), (2, 40), (3, 16)] {
                let mut cyls = cylinders(&m, n, j_max).unwrap();
                cyls.sort_by(|a, b| a.interval.partial_cmp(&b.interval).unwrap());
                let mut total = 0.0;
                for w in cyls.windows(2) {
                    assert!(
                        w[0].interval.1 <= w[1].interval.0 + 1e-11,
                        "overlap at alpha={alpha} n={n}"
                    );
                }
                for c in &cyls {
                    total += c.interval.1 - c.interval.0;
                    assert!(c.interval.0 >= m.left() - 1e-12 && c.interval.1 <= m.right() + 1e-12);
                    assert!(c.image.0 >= m.left() - 1e-9 && c.image.1 <= m.right() + 1e-9);
                }
                // each refinement level loses the untracked branches near 0
                let tail = n as f64 * 2.0 / (j_max as f64 - 1.0);
                assert!(
                    total >= 1.0 - tail - 1e-9,
                    "alpha={alpha} n={n}: covered {total}, allowed tail {tail}"
                );
            }
        }
    }

    #[test]
    fn image_count_examples() {
        let gauss = AlphaMap::new(1.0).unwrap();
        assert_eq!(image_count(&gauss, 1, 200).unwrap(), 1);

        let half = AlphaMap::new(0.5).unwrap();
        assert!(image_count(&half, 1, 200).unwrap() <= 3);

        let m = AlphaMap::new(0.7).unwrap();
        let fast = image_count(&m, 4, 30).unwrap();
        assert!(fast <= 9);
        // Oracle: full word enumeration. Its images are a subset (words
        // with digits ≥ the cutoff are dropped), equal once the cutoff
        // captures the cut-point orbits.
        let cyls = cylinders(&m, 4, 30).unwrap();
        let slow = dedup_intervals(cyls.iter().map(|c| c.image).collect()).len();
        assert!(slow <= fast);
        assert_eq!(fast, slow);
    }

    #[test]
    fn image_count_bound_across_alpha() {
        for tenth in 1..=10u32 {
            let alpha = f64::from(tenth) / 10.0;
            let m = AlphaMap::new(alpha).unwrap();
            for n in 1..=6 {
                let c = image_count(&m, n, 100).unwrap();
                assert!(c <= 2 * n + 1, "alpha={alpha} n={n}: {c} images");
            }
        }
    }

    #[test]
    fn weight_examples() {
        let gauss = AlphaMap::new(1.0).unwrap();
        assert_abs_diff_eq!(weight(&gauss, 2, 0.4).unwrap(), 0.04, epsilon = 1e-15);

        let m = AlphaMap::new(0.7).unwrap();
        let mut r = rng::stream(3, 0);
        for _ in 0..200 {
            let x = m.left() + r.random::<f64>();
            let w = weight(&m, 1, x).unwrap();
            assert!(w <= 0.49 + 1e-15);
            assert_abs_diff_eq!(w, x * x, epsilon = 1e-15);
        }

        assert_eq!(weight(&gauss, 3, 0.5).unwrap(), 0.0); // orbit hits 0
        assert_eq!(weight(&m, 1, m.right()).unwrap(), 0.0); // boundary
    }

    #[test]
    fn weight_sup_bound_holds_on_samples() {
        for alpha in [0.3, 0.5, 0.7] {
            let m = AlphaMap::new(alpha).unwrap();
            let mut r = rng::stream(13, alpha.to_bits());
            for n in 1..=8 {
                let bound = weight_sup_bound(&m, n);
                for _ in 0..400 {
                    let x = m.left() + r.random::<f64>();
                    let w = weight(&m, n, x).unwrap();
                    assert!(w <= bound * (1.0 + 1e-12), "alpha={alpha} n={n} w={w}");
                    assert!(w >= 0.0);
                }
            }
        }
        // α = 1 uses the golden-mean replacement bound.
        let gauss = AlphaMap::new(1.0).unwrap();
        let mut r = rng::stream(14, 0);
        for n in 1..=8 {
            let bound = weight_sup_bound(&gauss, n);
            for _ in 0..400 {
                let x = r.random::<f64>();
                let w = weight(&gauss, n, x).unwrap();
                assert!(w <= bound * (1.0 + 1e-12), "n={n} w={w} bound={bound}");
            }
        }
    }
}
