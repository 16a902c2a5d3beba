//! Shared network-instance types: direction, dimensions, channel gain with
//! block antenna structure, power constraint, fronthaul capacities, and
//! per-node input covariances.

use nalgebra::DMatrix;

use crate::error::{CranError, Result};
use crate::numkernel::RealMatrix;
use crate::polymatroid::Subset;

/// Trace tolerance (relative) for covariance validation.
const TRACE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Uplink => "uplink",
            Direction::Downlink => "downlink",
        }
    }

    pub fn parse(s: &str) -> Result<Direction> {
        match s {
            "uplink" | "up" => Ok(Direction::Uplink),
            "downlink" | "down" => Ok(Direction::Downlink),
            other => Err(CranError::Config(format!("unknown direction `{other}`"))),
        }
    }
}

/// One C-RAN instance: K users, L relays, antenna counts, channel gain,
/// per-node power, and the L fronthaul link capacities in bits per real
/// dimension.
///
/// The gain matrix is (N_r·L) × (N_u·K) for uplink and (N_u·K) × (N_r·L) for
/// downlink, with node-major antenna blocks.
#[derive(Clone, Debug)]
pub struct NetworkInstance {
    pub direction: Direction,
    pub users: usize,
    pub relays: usize,
    pub ant_user: usize,
    pub ant_relay: usize,
    pub gain: RealMatrix,
    pub power: f64,
    pub fronthaul: Vec<f64>,
}

impl NetworkInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        direction: Direction,
        users: usize,
        relays: usize,
        ant_user: usize,
        ant_relay: usize,
        gain: RealMatrix,
        power: f64,
        fronthaul: Vec<f64>,
    ) -> Result<Self> {
        if users == 0 || relays == 0 || ant_user == 0 || ant_relay == 0 {
            return Err(CranError::invalid("node and antenna counts must be >= 1"));
        }
        if !power.is_finite() || power <= 0.0 {
            return Err(CranError::invalid("power must be positive"));
        }
        if fronthaul.len() != relays {
            return Err(CranError::invalid(format!(
                "need {} fronthaul capacities, got {}",
                relays,
                fronthaul.len()
            )));
        }
        if fronthaul.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(CranError::invalid("fronthaul capacities must be >= 0"));
        }
        let (want_rows, want_cols) = match direction {
            Direction::Uplink => (ant_relay * relays, ant_user * users),
            Direction::Downlink => (ant_user * users, ant_relay * relays),
        };
        if gain.rows() != want_rows || gain.cols() != want_cols {
            return Err(CranError::invalid(format!(
                "gain must be {want_rows}x{want_cols} for {} with these counts, got {}x{}",
                direction.as_str(),
                gain.rows(),
                gain.cols()
            )));
        }
        Ok(NetworkInstance {
            direction,
            users,
            relays,
            ant_user,
            ant_relay,
            gain,
            power,
            fronthaul,
        })
    }

    /// Single-antenna uplink instance.
    pub fn uplink_siso(
        users: usize,
        relays: usize,
        gain: RealMatrix,
        power: f64,
        fronthaul: Vec<f64>,
    ) -> Result<Self> {
        Self::new(Direction::Uplink, users, relays, 1, 1, gain, power, fronthaul)
    }

    /// Single-antenna downlink instance.
    pub fn downlink_siso(
        users: usize,
        relays: usize,
        gain: RealMatrix,
        power: f64,
        fronthaul: Vec<f64>,
    ) -> Result<Self> {
        Self::new(Direction::Downlink, users, relays, 1, 1, gain, power, fronthaul)
    }

    pub fn c_sum(&self) -> f64 {
        self.fronthaul.iter().sum()
    }

    pub fn with_fronthaul(&self, fronthaul: Vec<f64>) -> Result<Self> {
        if fronthaul.len() != self.relays {
            return Err(CranError::invalid("fronthaul length mismatch"));
        }
        let mut out = self.clone();
        out.fronthaul = fronthaul;
        Ok(out)
    }

    /// Row indices of the gain matrix covered by the given node subset
    /// (relays for uplink, users for downlink).
    pub fn row_indices(&self, nodes: Subset) -> Vec<usize> {
        let per = match self.direction {
            Direction::Uplink => self.ant_relay,
            Direction::Downlink => self.ant_user,
        };
        nodes
            .indices()
            .flat_map(|n| (0..per).map(move |a| n * per + a))
            .collect()
    }

    pub fn sum_fronthaul(&self, relays: Subset) -> f64 {
        relays.indices().map(|l| self.fronthaul[l]).sum()
    }
}

/// Per-transmit-node input covariances: one N_u×N_u matrix per user for
/// uplink, one N_r×N_r matrix per relay for downlink, each with trace equal
/// to the node power.
#[derive(Clone, Debug)]
pub struct CovarianceSet {
    mats: Vec<DMatrix<f64>>,
    factors: Vec<DMatrix<f64>>, // B with B·Bᵀ = Γ
    block_dim: usize,
}

impl CovarianceSet {
    /// Default isotropic covariances (P/N)·I per transmit node.
    pub fn isotropic(inst: &NetworkInstance) -> CovarianceSet {
        let (count, dim) = match inst.direction {
            Direction::Uplink => (inst.users, inst.ant_user),
            Direction::Downlink => (inst.relays, inst.ant_relay),
        };
        let level = inst.power / dim as f64;
        let mat = DMatrix::<f64>::identity(dim, dim) * level;
        let factor = DMatrix::<f64>::identity(dim, dim) * level.sqrt();
        CovarianceSet {
            mats: vec![mat; count],
            factors: vec![factor; count],
            block_dim: dim,
        }
    }

    /// Caller-supplied covariances; validates symmetry, PSD-ness, and the
    /// per-node trace constraint tr(Γ) = P.
    pub fn from_matrices(inst: &NetworkInstance, mats: Vec<RealMatrix>) -> Result<CovarianceSet> {
        let (count, dim) = match inst.direction {
            Direction::Uplink => (inst.users, inst.ant_user),
            Direction::Downlink => (inst.relays, inst.ant_relay),
        };
        if mats.len() != count {
            return Err(CranError::invalid(format!(
                "need {count} covariance matrices, got {}",
                mats.len()
            )));
        }
        let mut out_mats = Vec::with_capacity(count);
        let mut factors = Vec::with_capacity(count);
        for m in &mats {
            let psd = crate::numkernel::PsdMatrix::new(m)?;
            if psd.dim() != dim {
                return Err(CranError::invalid(format!(
                    "covariance blocks must be {dim}x{dim}"
                )));
            }
            let trace: f64 = (0..dim).map(|i| psd.get(i, i)).sum();
            if (trace - inst.power).abs() > TRACE_TOL * inst.power.max(1.0) {
                return Err(CranError::invalid(format!(
                    "covariance trace {trace} differs from power {}",
                    inst.power
                )));
            }
            factors.push(psd.sqrt_factor());
            out_mats.push(psd.as_dmatrix().clone());
        }
        Ok(CovarianceSet {
            mats: out_mats,
            factors,
            block_dim: dim,
        })
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn count(&self) -> usize {
        self.mats.len()
    }

    pub fn matrix(&self, node: usize) -> &DMatrix<f64> {
        &self.mats[node]
    }

    pub fn factor(&self, node: usize) -> &DMatrix<f64> {
        &self.factors[node]
    }
}

/// Computed sum-rate quantities for one instance at one quantization noise
/// level. `inner` is reported raw (it can be negative at pathological
/// fronthaul/noise combinations); `inner_clamped` is the zero-floored copy.
#[derive(Clone, Debug)]
pub struct SumRateReport {
    pub inner: f64,
    pub inner_clamped: f64,
    pub outer: f64,
    pub unlimited: f64,
    pub c_star: f64,
    pub sigma_sq: f64,
    pub argmin_subset: Subset,
    pub delta_per_user: Option<f64>,
    pub delta_sum: Option<f64>,
}

/// Dual-feasible diagonal certificate for the downlink fronthaul-unlimited
/// sum-capacity upper bound: nonnegative diagonal with trace ≤ N_r/P, equal
/// diagonals within each relay block, and the bound it achieves.
#[derive(Clone, Debug)]
pub struct DualCertificate {
    pub q_diag: Vec<f64>,
    pub bound: f64,
}

impl DualCertificate {
    pub fn validate(&self, inst: &NetworkInstance) -> Result<()> {
        let n = inst.ant_relay * inst.relays;
        if self.q_diag.len() != n {
            return Err(CranError::invalid("certificate dimension mismatch"));
        }
        if self.q_diag.iter().any(|&q| q < 0.0) {
            return Err(CranError::invalid("certificate entries must be >= 0"));
        }
        let trace: f64 = self.q_diag.iter().sum();
        let cap = inst.ant_relay as f64 / inst.power;
        if trace > cap * (1.0 + TRACE_TOL) + TRACE_TOL {
            return Err(CranError::invalid(format!(
                "certificate trace {trace} exceeds {cap}"
            )));
        }
        for l in 0..inst.relays {
            let block = &self.q_diag[l * inst.ant_relay..(l + 1) * inst.ant_relay];
            for pair in block.windows(2) {
                if (pair[0] - pair[1]).abs() > TRACE_TOL * pair[0].abs().max(1.0) {
                    return Err(CranError::invalid(
                        "certificate must have equal diagonals within each relay block",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Weighted channel submatrix factor: rows restricted to `row_nodes` blocks,
/// columns to `col_nodes` blocks, each transmit block k multiplied by the
/// covariance factor B_k so that M·Mᵀ = Σ_k G_k Γ_k G_kᵀ.
pub(crate) fn weighted_submatrix(
    inst: &NetworkInstance,
    cov: &CovarianceSet,
    row_nodes: Subset,
    col_nodes: Subset,
) -> DMatrix<f64> {
    let rows = inst.row_indices(row_nodes);
    let nrows = rows.len();
    let bd = cov.block_dim();
    let cols: Vec<usize> = col_nodes.indices().collect();
    let mut out = DMatrix::<f64>::zeros(nrows, cols.len() * bd);
    if nrows == 0 {
        return out;
    }
    let g = inst.gain.as_dmatrix();
    for (bi, &node) in cols.iter().enumerate() {
        let col_idx: Vec<usize> = (0..bd).map(|a| node * bd + a).collect();
        let block = g.select_rows(rows.as_slice()).select_columns(col_idx.as_slice());
        let weighted = block * cov.factor(node);
        out.view_mut((0, bi * bd), (nrows, bd)).copy_from(&weighted);
    }
    out
}

/// log₂|I + scale · Σ_k G_k Γ_k G_kᵀ| over the selected blocks (full log,
/// callers halve it). Zero when either side is empty.
pub(crate) fn weighted_logdet(
    inst: &NetworkInstance,
    cov: &CovarianceSet,
    row_nodes: Subset,
    col_nodes: Subset,
    scale: f64,
) -> f64 {
    if row_nodes.is_empty() || col_nodes.is_empty() {
        return 0.0;
    }
    let m = weighted_submatrix(inst, cov, row_nodes, col_nodes);
    let rm = RealMatrix::from_dmatrix(m).expect("finite weighted submatrix");
    crate::numkernel::logdet_gram(&rm, scale).expect("valid scale")
}

/// Squared singular values of the weighted submatrix, descending; shared by
/// the gap audits so one factorization serves every noise level.
pub(crate) fn weighted_gram_eigenvalues(
    inst: &NetworkInstance,
    cov: &CovarianceSet,
    row_nodes: Subset,
    col_nodes: Subset,
) -> Vec<f64> {
    if row_nodes.is_empty() || col_nodes.is_empty() {
        return Vec::new();
    }
    let m = weighted_submatrix(inst, cov, row_nodes, col_nodes);
    crate::numkernel::gram_eigenvalues(&m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_validates_dimensions() {
        let g = RealMatrix::zeros(2, 1);
        assert!(NetworkInstance::uplink_siso(1, 2, g.clone(), 1.0, vec![1.0, 1.0]).is_ok());
        assert!(NetworkInstance::uplink_siso(1, 2, g.clone(), 1.0, vec![1.0]).is_err());
        assert!(NetworkInstance::uplink_siso(2, 2, g.clone(), 1.0, vec![1.0, 1.0]).is_err());
        assert!(NetworkInstance::uplink_siso(1, 2, g.clone(), 0.0, vec![1.0, 1.0]).is_err());
        assert!(NetworkInstance::uplink_siso(1, 2, g, 1.0, vec![-1.0, 1.0]).is_err());
    }

    #[test]
    fn mimo_dimension_checks() {
        let g = RealMatrix::zeros(6, 4);
        // uplink: N_r*L x N_u*K = 3*2 x 2*2
        assert!(
            NetworkInstance::new(Direction::Uplink, 2, 2, 2, 3, g.clone(), 1.0, vec![0.0; 2])
                .is_ok()
        );
        assert!(NetworkInstance::new(Direction::Downlink, 2, 2, 2, 3, g, 1.0, vec![0.0; 2]).is_err());
    }

    #[test]
    fn isotropic_covariance_has_power_trace() {
        let g = RealMatrix::zeros(4, 6);
        let inst =
            NetworkInstance::new(Direction::Uplink, 3, 2, 2, 2, g, 5.0, vec![1.0, 1.0]).unwrap();
        let cov = CovarianceSet::isotropic(&inst);
        assert_eq!(cov.count(), 3);
        let tr: f64 = (0..2).map(|i| cov.matrix(0)[(i, i)]).sum();
        assert!((tr - 5.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_trace_is_enforced() {
        let g = RealMatrix::zeros(2, 2);
        let inst = NetworkInstance::uplink_siso(2, 2, g, 3.0, vec![0.0, 0.0]).unwrap();
        let bad = vec![
            RealMatrix::new(1, 1, vec![1.0]).unwrap(),
            RealMatrix::new(1, 1, vec![3.0]).unwrap(),
        ];
        assert!(CovarianceSet::from_matrices(&inst, bad).is_err());
        let good = vec![
            RealMatrix::new(1, 1, vec![3.0]).unwrap(),
            RealMatrix::new(1, 1, vec![3.0]).unwrap(),
        ];
        assert!(CovarianceSet::from_matrices(&inst, good).is_ok());
    }

    #[test]
    fn weighted_logdet_reduces_to_scalar_formula() {
        // SISO: log2|I + (P/(1+sigma^2)) G Gᵀ| on the full sets
        let g = RealMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        let inst = NetworkInstance::uplink_siso(1, 2, g, 15.0, vec![0.0, 0.0]).unwrap();
        let cov = CovarianceSet::isotropic(&inst);
        let v = weighted_logdet(&inst, &cov, Subset::full(2), Subset::full(1), 1.0 / 2.0);
        assert!((v - 4.0).abs() < 1e-12, "{v}"); // log2(1 + 2*15/2) = 4
    }
}
