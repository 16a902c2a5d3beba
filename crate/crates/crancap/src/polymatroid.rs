//! Set-function machinery behind the sum-rate and allocation theorems:
//! exhaustive subset minimization, polymatroid checks, greedy base vectors,
//! exchange repair toward a per-coordinate floor, and the Edmonds
//! intersection value with an explicit witness.
//!
//! Ground sets are index sets {0, …, L−1} with L ≤ 20; subsets are bitmasks.

use std::fmt;
use std::sync::Arc;

use crate::error::{CranError, Result};

/// Hard cap on ground-set size for any `SetFn`.
pub const MAX_GROUND: usize = 20;
/// Cap for the exhaustive polymatroid check (2^L · L² evaluations).
pub const MAX_CHECK_GROUND: usize = 16;
/// Absolute tolerance on bit values for membership and feasibility.
pub const FEAS_TOL: f64 = 1e-9;

/// Subset of a ground set, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Subset(pub u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn full(n: usize) -> Subset {
        Subset(((1u64 << n) - 1) as u32)
    }

    pub fn from_indices(idx: &[usize]) -> Subset {
        let mut m = 0u32;
        for &i in idx {
            m |= 1 << i;
        }
        Subset(m)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Subset {
        Subset(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Subset {
        Subset(self.0 & !(1 << i))
    }

    pub fn card(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, n: usize) -> Subset {
        Subset(Self::full(n).0 & !self.0)
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn intersect(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |i| self.0 & (1 << i) != 0)
    }

    /// All 2^n subsets of [n], ascending by mask.
    pub fn all(n: usize) -> impl Iterator<Item = Subset> {
        (0..(1u64 << n)).map(|m| Subset(m as u32))
    }

    /// All subsets of `self`, ascending by mask.
    pub fn subsets(self) -> SubsetsOf {
        SubsetsOf {
            mask: self.0,
            current: 0,
            done: false,
        }
    }
}

pub struct SubsetsOf {
    mask: u32,
    current: u32,
    done: bool,
}

impl Iterator for SubsetsOf {
    type Item = Subset;

    fn next(&mut self) -> Option<Subset> {
        if self.done {
            return None;
        }
        let out = Subset(self.current);
        if self.current == self.mask {
            self.done = true;
        } else {
            self.current = (self.current.wrapping_sub(self.mask)) & self.mask;
        }
        Some(out)
    }
}

impl fmt::Display for Subset {
    /// One-based index listing, e.g. `{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.indices().map(|i| (i + 1).to_string()).collect();
        write!(f, "{{{}}}", items.join(","))
    }
}

/// Verification state of one structural property.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Flag {
    VerifiedTrue,
    VerifiedFalse,
    Unchecked,
}

/// Normalized set function on a ground set [L] with cached property flags.
/// Flags move from `Unchecked` only through [`check_polymatroid`] (or via the
/// crate-internal constructor for families proven polymatroidal in closed
/// form).
#[derive(Clone)]
pub struct SetFn {
    ground: usize,
    eval: Arc<dyn Fn(Subset) -> f64 + Send + Sync>,
    normalized: Flag,
    monotone: Flag,
    submodular: Flag,
}

impl SetFn {
    pub fn new<F>(ground: usize, eval: F) -> Result<SetFn>
    where
        F: Fn(Subset) -> f64 + Send + Sync + 'static,
    {
        if ground == 0 || ground > MAX_GROUND {
            return Err(CranError::size_limit(format!(
                "ground set size {ground} outside 1..={MAX_GROUND}"
            )));
        }
        Ok(SetFn {
            ground,
            eval: Arc::new(eval),
            normalized: Flag::Unchecked,
            monotone: Flag::Unchecked,
            submodular: Flag::Unchecked,
        })
    }

    /// Modular function S ↦ Σ_{l∈S} w_l.
    pub fn modular(weights: Vec<f64>) -> Result<SetFn> {
        let n = weights.len();
        let f = SetFn::new(n, move |s: Subset| s.indices().map(|i| weights[i]).sum())?;
        Ok(f)
    }

    /// Constructor for families whose polymatroid structure holds by
    /// construction (log-det rate families, nonnegative modular functions).
    /// Callers outside the crate go through [`check_polymatroid`].
    pub(crate) fn new_verified<F>(ground: usize, eval: F) -> Result<SetFn>
    where
        F: Fn(Subset) -> f64 + Send + Sync + 'static,
    {
        let mut f = SetFn::new(ground, eval)?;
        f.normalized = Flag::VerifiedTrue;
        f.monotone = Flag::VerifiedTrue;
        f.submodular = Flag::VerifiedTrue;
        Ok(f)
    }

    pub fn ground_size(&self) -> usize {
        self.ground
    }

    pub fn eval(&self, s: Subset) -> f64 {
        debug_assert!(s.0 < (1u64 << self.ground) as u32);
        (self.eval)(s)
    }

    pub fn flags(&self) -> (Flag, Flag, Flag) {
        (self.normalized, self.monotone, self.submodular)
    }

    pub fn is_verified_polymatroid(&self) -> bool {
        self.normalized == Flag::VerifiedTrue
            && self.monotone == Flag::VerifiedTrue
            && self.submodular == Flag::VerifiedTrue
    }

    /// Full table of 2^L values, indexed by mask.
    pub fn table(&self) -> Vec<f64> {
        Subset::all(self.ground).map(|s| self.eval(s)).collect()
    }
}

impl fmt::Debug for SetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetFn")
            .field("ground", &self.ground)
            .field("normalized", &self.normalized)
            .field("monotone", &self.monotone)
            .field("submodular", &self.submodular)
            .finish()
    }
}

/// Which property a violation witnesses.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ViolationKind {
    Normalization,
    Monotonicity,
    Submodularity,
}

/// First violation found by the exhaustive check, with the witnessing pair.
#[derive(Clone, Copy, Debug)]
pub struct Violation {
    pub kind: ViolationKind,
    pub s: Subset,
    pub t: Subset,
}

/// Outcome of [`check_polymatroid`].
#[derive(Clone, Debug)]
pub struct PolymatroidCheck {
    pub normalized: bool,
    pub monotone: bool,
    pub submodular: bool,
    pub violation: Option<Violation>,
}

impl PolymatroidCheck {
    pub fn all_hold(&self) -> bool {
        self.normalized && self.monotone && self.submodular
    }
}

/// Exhaustively verify normalization, monotonicity, and submodularity
/// (local exchange form, 2^L·L² pairs). Returns a new view with flags set
/// and the first violation found, if any.
pub fn check_polymatroid(f: &SetFn) -> Result<(SetFn, PolymatroidCheck)> {
    let n = f.ground_size();
    if n > MAX_CHECK_GROUND {
        return Err(CranError::size_limit(format!(
            "exhaustive check supports ground sets up to {MAX_CHECK_GROUND}, got {n}"
        )));
    }
    let table = f.table();
    let mut check = PolymatroidCheck {
        normalized: true,
        monotone: true,
        submodular: true,
        violation: None,
    };

    if table[0].abs() > FEAS_TOL {
        check.normalized = false;
        check.violation = Some(Violation {
            kind: ViolationKind::Normalization,
            s: Subset::EMPTY,
            t: Subset::EMPTY,
        });
    }

    'mono: for s in Subset::all(n) {
        for i in 0..n {
            if s.contains(i) {
                continue;
            }
            if table[s.with(i).0 as usize] < table[s.0 as usize] - FEAS_TOL {
                check.monotone = false;
                if check.violation.is_none() {
                    check.violation = Some(Violation {
                        kind: ViolationKind::Monotonicity,
                        s,
                        t: s.with(i),
                    });
                }
                break 'mono;
            }
        }
    }

    // local characterization: f(S+i) + f(S+j) >= f(S+i+j) + f(S)
    'sub: for s in Subset::all(n) {
        for i in 0..n {
            if s.contains(i) {
                continue;
            }
            for j in (i + 1)..n {
                if s.contains(j) {
                    continue;
                }
                let lhs = table[s.with(i).0 as usize] + table[s.with(j).0 as usize];
                let rhs = table[s.with(i).with(j).0 as usize] + table[s.0 as usize];
                if lhs < rhs - FEAS_TOL {
                    check.submodular = false;
                    if check.violation.is_none() {
                        check.violation = Some(Violation {
                            kind: ViolationKind::Submodularity,
                            s: s.with(i),
                            t: s.with(j),
                        });
                    }
                    break 'sub;
                }
            }
        }
    }

    let mut out = f.clone();
    let to_flag = |b: bool| if b { Flag::VerifiedTrue } else { Flag::VerifiedFalse };
    out.normalized = to_flag(check.normalized);
    out.monotone = to_flag(check.monotone);
    out.submodular = to_flag(check.submodular);
    Ok((out, check))
}

/// Exact minimum of φ(Sᶜ) + ψ(S) over all 2^L subsets S. Ties break toward
/// the smaller cardinality, then the smaller bitmask.
pub fn min_complementary_sum(phi: &SetFn, psi: &SetFn) -> Result<(f64, Subset)> {
    let n = phi.ground_size();
    if n != psi.ground_size() {
        return Err(CranError::invalid(format!(
            "ground sizes differ: {} vs {}",
            n,
            psi.ground_size()
        )));
    }
    let mut best = f64::INFINITY;
    let mut arg = Subset::EMPTY;
    for s in Subset::all(n) {
        let v = phi.eval(s.complement(n)) + psi.eval(s);
        if v < best
            || (v == best && (s.card(), s.0) < (arg.card(), arg.0))
        {
            best = v;
            arg = s;
        }
    }
    Ok((best, arg))
}

/// Base vector of a polymatroid: y(S) ≤ φ(S) for every S with tight total
/// sum y([L]) = φ([L]).
#[derive(Clone, Debug, PartialEq)]
pub struct BaseVector {
    coords: Vec<f64>,
}

impl BaseVector {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn total(&self) -> f64 {
        self.coords.iter().sum()
    }

    fn sum_over(&self, s: Subset) -> f64 {
        s.indices().map(|i| self.coords[i]).sum()
    }

    /// Check membership in P(φ) with tight total, to `FEAS_TOL`.
    pub fn is_base_of(&self, phi: &SetFn) -> bool {
        let n = phi.ground_size();
        if self.coords.len() != n {
            return false;
        }
        if (self.total() - phi.eval(Subset::full(n))).abs() > FEAS_TOL {
            return false;
        }
        Subset::all(n).all(|s| self.sum_over(s) <= phi.eval(s) + FEAS_TOL)
    }
}

/// Greedy base vector of a verified polymatroid along the given visiting
/// order: the increment of φ along the induced chain.
pub fn greedy_base(phi: &SetFn, order: &[usize]) -> Result<BaseVector> {
    let n = phi.ground_size();
    if !phi.is_verified_polymatroid() {
        return Err(CranError::Unverified(
            "greedy base requires verified normalized+monotone+submodular flags".into(),
        ));
    }
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(CranError::invalid("order must be a permutation of the ground set"));
    }
    let mut coords = vec![0.0; n];
    let mut prefix = Subset::EMPTY;
    let mut prev = 0.0;
    for &i in order {
        prefix = prefix.with(i);
        let cur = phi.eval(prefix);
        coords[i] = cur - prev;
        prev = cur;
    }
    Ok(BaseVector { coords })
}

/// Raise every coordinate of a base vector to at least `floor` by exchange
/// moves that keep it a base vector. Each move transfers mass from the
/// largest surplus coordinate to a deficient one, capped by the donor's
/// surplus, the recipient's deficiency, and the exchange capacity
/// min{φ(S) − y(S) : recipient ∈ S, donor ∉ S}.
pub fn raise_base_to_floor(phi: &SetFn, y: &BaseVector, floor: f64) -> Result<BaseVector> {
    let n = phi.ground_size();
    if !phi.is_verified_polymatroid() {
        return Err(CranError::Unverified(
            "floor repair requires verified polymatroid flags".into(),
        ));
    }
    if !floor.is_finite() || floor < 0.0 {
        return Err(CranError::invalid("floor must be finite and >= 0"));
    }
    let total = phi.eval(Subset::full(n));
    if total < n as f64 * floor - FEAS_TOL {
        return Err(CranError::Infeasible {
            reason: format!("φ([L]) = {total} cannot cover {n} coordinates at floor {floor}"),
            deficit: n as f64 * floor - total,
        });
    }
    if y.coords.len() != n {
        return Err(CranError::invalid("base vector length mismatch"));
    }

    let table = phi.table();
    let mut coords = y.coords.clone();
    let sum_over = |coords: &[f64], s: Subset| -> f64 { s.indices().map(|i| coords[i]).sum() };

    // exchange capacity from donor j to recipient i
    let capacity = |coords: &[f64], i: usize, j: usize| -> f64 {
        let mut cap = f64::INFINITY;
        for s in Subset::all(n) {
            if s.contains(i) && !s.contains(j) {
                cap = cap.min(table[s.0 as usize] - sum_over(coords, s));
            }
        }
        cap
    };

    for _ in 0..n * n {
        let deficient = (0..n)
            .filter(|&i| coords[i] < floor - FEAS_TOL)
            .min_by(|&a, &b| coords[a].partial_cmp(&coords[b]).unwrap());
        let i = match deficient {
            Some(i) => i,
            None => break,
        };
        let mut donors: Vec<usize> = (0..n).filter(|&j| j != i && coords[j] > floor + FEAS_TOL).collect();
        donors.sort_by(|&a, &b| coords[b].partial_cmp(&coords[a]).unwrap());
        let mut moved = false;
        for j in donors {
            let amount = (coords[j] - floor)
                .min(floor - coords[i])
                .min(capacity(&coords, i, j));
            if amount > FEAS_TOL {
                coords[i] += amount;
                coords[j] -= amount;
                moved = true;
                break;
            }
        }
        if !moved {
            return Err(CranError::Infeasible {
                reason: "no base vector meets the floor (exchange capacities exhausted)".into(),
                deficit: floor - coords[i],
            });
        }
    }

    if coords.iter().any(|&c| c < floor - FEAS_TOL) {
        return Err(CranError::Infeasible {
            reason: "exchange repair did not converge".into(),
            deficit: floor
                - coords
                    .iter()
                    .fold(f64::INFINITY, |a, &b| a.min(b)),
        });
    }
    Ok(BaseVector { coords })
}

/// Edmonds intersection: maximum total over P(φ) ∩ P(ψ) with an explicit
/// witness attaining it.
#[derive(Clone, Debug)]
pub struct IntersectionMax {
    pub value: f64,
    pub witness: Vec<f64>,
}

/// Maximum of Σ x_l over the intersection of two verified polymatroids.
/// The value comes from the min side (exact subset enumeration); the witness
/// is built coordinate by coordinate against vector-contracted tables, so it
/// lies in both polymatroids and sums to the value.
pub fn edmonds_intersection_max(phi: &SetFn, psi: &SetFn) -> Result<IntersectionMax> {
    let n = phi.ground_size();
    if n != psi.ground_size() {
        return Err(CranError::invalid("ground sizes differ"));
    }
    if !phi.is_verified_polymatroid() || !psi.is_verified_polymatroid() {
        return Err(CranError::Unverified(
            "intersection maximum requires verified polymatroid flags".into(),
        ));
    }

    let mut phi_t = phi.table();
    let mut psi_t = psi.table();
    let full = Subset::full(n);
    let value = Subset::all(n)
        .map(|s| phi_t[s.0 as usize] + psi_t[s.complement(n).0 as usize])
        .fold(f64::INFINITY, f64::min);

    let mut witness = vec![0.0; n];
    let mut remaining = value;
    let mut ground = full;
    for i in 0..n {
        let rest = ground.without(i);
        // largest x_i keeping the residual intersection worth remaining − x_i:
        // min over splits (U, rest∖U) of the i-augmented pair sums, and the
        // plain singleton caps.
        let mut cap = phi_t[Subset::EMPTY.with(i).0 as usize]
            .min(psi_t[Subset::EMPTY.with(i).0 as usize]);
        for u in rest.subsets() {
            let w = Subset(rest.0 & !u.0).with(i); // (rest ∖ U) ∪ {i}
            let bound = phi_t[u.with(i).0 as usize] + psi_t[w.0 as usize] - remaining;
            cap = cap.min(bound);
        }
        let x = cap.max(0.0);
        witness[i] = x;
        // contract both tables by x placed on coordinate i
        for u in rest.subsets() {
            let with_i = u.with(i).0 as usize;
            let at = u.0 as usize;
            phi_t[at] = phi_t[at].min(phi_t[with_i] - x);
            psi_t[at] = psi_t[at].min(psi_t[with_i] - x);
        }
        remaining -= x;
        ground = rest;
    }

    Ok(IntersectionMax { value, witness })
}
