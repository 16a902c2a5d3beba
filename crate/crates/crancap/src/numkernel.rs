//! Deterministic numeric primitives behind the bound formulas: Gram
//! log-determinants, conditional (Schur-complement) covariances, symmetric
//! eigenvalues, water-filling, binary entropy, and Marchenko-Pastur support
//! edges. All information quantities are in bits.

use nalgebra::{DMatrix, DVector};

use crate::error::{CranError, Result};

/// Relative tolerance for symmetry of a PSD matrix.
const SYM_TOL: f64 = 1e-10;
/// Eigenvalues above -PSD_TOL * (largest magnitude) are clamped to zero.
const PSD_TOL: f64 = 1e-9;
/// Singular values below this fraction of the largest are dropped when
/// pseudo-inverting a singular block.
const PINV_CUTOFF: f64 = 1e-12;

/// Dense real matrix with finite entries, row-major construction order.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    inner: DMatrix<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, row_major: Vec<f64>) -> Result<Self> {
        if row_major.len() != rows * cols {
            return Err(CranError::invalid(format!(
                "matrix needs {} entries, got {}",
                rows * cols,
                row_major.len()
            )));
        }
        if row_major.iter().any(|v| !v.is_finite()) {
            return Err(CranError::invalid("matrix entries must be finite"));
        }
        Ok(RealMatrix {
            inner: DMatrix::from_row_slice(rows, cols, &row_major),
        })
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CranError::invalid("matrix entries must be finite"));
        }
        Ok(RealMatrix { inner: m })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.inner[(r, c)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn transposed(&self) -> RealMatrix {
        RealMatrix {
            inner: self.inner.transpose(),
        }
    }

    /// Submatrix keeping the listed rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> RealMatrix {
        RealMatrix {
            inner: self.inner.select_rows(rows).select_columns(cols),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.inner.iter().all(|v| *v == 0.0)
    }

    /// Text form: first line `rows cols`, then one row per line with 17
    /// significant digits per entry.
    pub fn write_text<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.rows(), self.cols())?;
        for r in 0..self.rows() {
            let row: Vec<String> = (0..self.cols())
                .map(|c| format!("{:.16e}", self.get(r, c)))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: std::io::BufRead>(r: &mut R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| CranError::invalid("bad matrix header")))
            .collect::<Result<_>>()?;
        if dims.len() != 2 {
            return Err(CranError::invalid("matrix header must be `rows cols`"));
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let mut line = String::new();
            r.read_line(&mut line)?;
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| CranError::invalid(format!("bad matrix entry `{tok}`")))?;
                data.push(v);
            }
        }
        RealMatrix::new(rows, cols, data)
    }
}

/// Square matrix verified symmetric (to relative tolerance) with eigenvalues
/// no smaller than a rounding-noise floor.
#[derive(Clone, Debug)]
pub struct PsdMatrix {
    inner: DMatrix<f64>,
}

impl PsdMatrix {
    pub fn new(m: &RealMatrix) -> Result<Self> {
        Self::from_dmatrix(m.as_dmatrix().clone())
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CranError::invalid("PSD matrix must be square"));
        }
        let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYM_TOL * scale {
                    return Err(CranError::invalid("matrix is not symmetric"));
                }
            }
        }
        let sym = symmetrize(&m);
        let eigs = sym_eigenvalues(&sym);
        let max_mag = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if eigs.iter().any(|&l| l < -PSD_TOL * max_mag) {
            return Err(CranError::invalid("matrix has a negative eigenvalue"));
        }
        Ok(PsdMatrix { inner: sym })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&d| !d.is_finite() || d < 0.0) {
            return Err(CranError::invalid("diagonal entries must be finite and >= 0"));
        }
        Ok(PsdMatrix {
            inner: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.inner[(r, c)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// Factor B with B * Bᵀ equal to this matrix, via eigendecomposition
    /// with negative rounding noise clamped to zero.
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        let se = self.inner.clone().symmetric_eigen();
        let mut vecs = se.eigenvectors;
        for (c, &l) in se.eigenvalues.iter().enumerate() {
            let s = l.max(0.0).sqrt();
            for r in 0..vecs.nrows() {
                vecs[(r, c)] *= s;
            }
        }
        vecs
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut eigs: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Eigenvalues of the Gram form of `m` (the smaller of M·Mᵀ and Mᵀ·M),
/// clamped at zero, descending. These are the squared singular values.
pub fn gram_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let mut eigs = sym_eigenvalues(&symmetrize(&gram));
    for l in eigs.iter_mut() {
        *l = l.max(0.0);
    }
    eigs.reverse();
    eigs
}

/// log₂|I + scale·M·Mᵀ| computed from a symmetric factorization of the
/// smaller Gram orientation (both orientations share the same value).
pub fn logdet_gram(m: &RealMatrix, scale: f64) -> Result<f64> {
    if !scale.is_finite() || scale < 0.0 {
        return Err(CranError::invalid("scale must be finite and >= 0"));
    }
    if m.rows() == 0 || m.cols() == 0 || scale == 0.0 {
        return Ok(0.0);
    }
    let md = m.as_dmatrix();
    let gram = if m.rows() <= m.cols() {
        md * md.transpose()
    } else {
        md.transpose() * md
    };
    let n = gram.nrows();
    let shifted = symmetrize(&(scale * gram + DMatrix::<f64>::identity(n, n)));
    if let Some(chol) = shifted.clone().cholesky() {
        let ld: f64 = (0..n).map(|i| chol.l_dirty()[(i, i)].log2()).sum();
        return Ok((2.0 * ld).max(0.0));
    }
    // Rounding noise can defeat Cholesky when scale is extreme; fall back to
    // eigenvalues of the Gram matrix with the PSD clamp.
    let eigs = sym_eigenvalues(&(shifted - DMatrix::<f64>::identity(n, n)));
    let sum: f64 = eigs.iter().map(|&l| (1.0 + l.max(0.0)).log2()).sum();
    Ok(sum.max(0.0))
}

/// Conditional covariance Γ_{S|Sᶜ} = Γ_{S,S} − Γ_{S,Sᶜ} Γ_{Sᶜ,Sᶜ}⁻¹ Γ_{Sᶜ,S},
/// with the Moore-Penrose pseudoinverse when the conditioning block is
/// singular. `keep` lists the retained indices S.
pub fn conditional_covariance(gamma: &PsdMatrix, keep: &[usize]) -> Result<PsdMatrix> {
    if keep.is_empty() {
        return Err(CranError::invalid("conditioning set S must be nonempty"));
    }
    let n = gamma.dim();
    if keep.iter().any(|&i| i >= n) {
        return Err(CranError::invalid("index out of range"));
    }
    let mut seen = vec![false; n];
    for &i in keep {
        if seen[i] {
            return Err(CranError::invalid("duplicate index in S"));
        }
        seen[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|i| !seen[*i]).collect();
    let g = gamma.as_dmatrix();
    let gss = g.select_rows(keep.as_ref() as &[usize]).select_columns(keep.as_ref() as &[usize]);
    if rest.is_empty() {
        return PsdMatrix::from_dmatrix(gss);
    }
    let gsr = g.select_rows(keep.as_ref() as &[usize]).select_columns(&rest);
    let grr = g.select_rows(&rest).select_columns(&rest);
    let pinv = sym_pseudoinverse(&symmetrize(&grr));
    let cond = &gss - &gsr * pinv * gsr.transpose();
    // Clamp rounding noise so the result stays PSD.
    let sym = symmetrize(&cond);
    let se = sym.clone().symmetric_eigen();
    let max_mag = se.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut vals = se.eigenvalues.clone();
    for l in vals.iter_mut() {
        if *l < 0.0 && *l >= -PSD_TOL * max_mag {
            *l = 0.0;
        }
    }
    let rebuilt = &se.eigenvectors * DMatrix::from_diagonal(&vals) * se.eigenvectors.transpose();
    PsdMatrix::from_dmatrix(symmetrize(&rebuilt))
}

fn sym_pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let se = m.clone().symmetric_eigen();
    let max_mag = se.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = PINV_CUTOFF * max_mag;
    let mut inv = se.eigenvalues.clone();
    for l in inv.iter_mut() {
        *l = if l.abs() > cutoff { 1.0 / *l } else { 0.0 };
    }
    &se.eigenvectors * DMatrix::from_diagonal(&inv) * se.eigenvectors.transpose()
}

/// Powers maximizing Σ log₂(1 + gᵢ pᵢ) subject to Σ pᵢ = budget, pᵢ ≥ 0.
pub fn water_fill(gains: &[f64], budget: f64) -> Result<Vec<f64>> {
    if !budget.is_finite() || budget <= 0.0 {
        return Err(CranError::invalid("budget must be positive"));
    }
    if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(CranError::invalid("gains must be finite and >= 0"));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return Err(CranError::invalid("all channel gains are zero"));
    }
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap());

    let mut inv_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (m, &idx) in order.iter().enumerate() {
        inv_sum += 1.0 / gains[idx];
        let mu = (budget + inv_sum) / (m + 1) as f64;
        let next_floor = order.get(m + 1).map(|&j| 1.0 / gains[j]);
        active = m + 1;
        level = mu;
        match next_floor {
            Some(floor) if mu > floor => continue,
            _ => break,
        }
    }
    let mut out = vec![0.0; gains.len()];
    for &idx in order.iter().take(active) {
        out[idx] = (level - 1.0 / gains[idx]).max(0.0);
    }
    Ok(out)
}

/// Binary entropy in bits, with 0·log 0 := 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CranError::invalid("p must lie in [0, 1]"));
    }
    let term = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// Support edges ((√ρ−1)², (√ρ+1)²) of the Marchenko-Pastur density for
/// aspect ratio ρ ≥ 1.
pub fn marchenko_pastur_edges(rho: f64) -> Result<(f64, f64)> {
    if !rho.is_finite() || rho < 1.0 {
        return Err(CranError::invalid("aspect ratio must be >= 1"));
    }
    let r = rho.sqrt();
    Ok(((r - 1.0) * (r - 1.0), (r + 1.0) * (r + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| crate::rng::std_normal(&[seed, i as u64]))
            .collect();
        RealMatrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn logdet_of_zero_matrix_is_zero() {
        let m = RealMatrix::zeros(3, 2);
        assert_eq!(logdet_gram(&m, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn logdet_of_repeated_unit_column() {
        // two identical unit rows: |I + P·MMᵀ| = 1 + 2P
        let m = RealMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(logdet_gram(&m, 7.5).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn logdet_matches_eigenvalue_oracle() {
        // oracle: product of (1 + s·λᵢ) over eigenvalues of MᵀM
        let m = random_matrix(4, 3, 17);
        let mt_m = m.as_dmatrix().transpose() * m.as_dmatrix();
        let oracle: f64 = sym_eigenvalues(&mt_m)
            .iter()
            .map(|&l| (1.0 + 0.7 * l.max(0.0)).log2())
            .sum();
        assert_relative_eq!(logdet_gram(&m, 0.7).unwrap(), oracle, epsilon = 1e-9);
    }

    #[test]
    fn logdet_rejects_bad_scale() {
        let m = random_matrix(2, 2, 3);
        assert!(logdet_gram(&m, -1.0).is_err());
        assert!(logdet_gram(&m, f64::NAN).is_err());
    }

    #[test]
    fn schur_of_diagonal_is_restriction() {
        let g = PsdMatrix::from_diagonal(&[4.0, 4.0, 4.0]).unwrap();
        let c = conditional_covariance(&g, &[0, 2]).unwrap();
        assert_eq!(c.dim(), 2);
        assert_relative_eq!(c.get(0, 0), 4.0, epsilon = 1e-12);
        assert_relative_eq!(c.get(1, 1), 4.0, epsilon = 1e-12);
        assert_relative_eq!(c.get(0, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn schur_two_by_two_hand_value() {
        let g = PsdMatrix::new(&RealMatrix::new(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap()).unwrap();
        let c = conditional_covariance(&g, &[0]).unwrap();
        assert_relative_eq!(c.get(0, 0), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn schur_with_empty_complement_is_identity_operation() {
        let g = PsdMatrix::new(&RealMatrix::new(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap()).unwrap();
        let c = conditional_covariance(&g, &[0, 1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(c.get(i, j), g.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn schur_rejects_empty_keep_set() {
        let g = PsdMatrix::from_diagonal(&[1.0]).unwrap();
        assert!(conditional_covariance(&g, &[]).is_err());
    }

    #[test]
    fn schur_handles_singular_block_via_pseudoinverse() {
        // rank-1 Gram: conditioning on the replicated coordinate removes
        // everything.
        let m = RealMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        let g = PsdMatrix::from_dmatrix(m.as_dmatrix() * m.as_dmatrix().transpose()).unwrap();
        let c = conditional_covariance(&g, &[0]).unwrap();
        assert!(c.get(0, 0).abs() < 1e-9);
    }

    #[test]
    fn water_fill_single_usable_channel() {
        assert_eq!(water_fill(&[1.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn water_fill_symmetry() {
        let p = water_fill(&[1.0, 1.0], 2.0).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn water_fill_matches_grid_search() {
        let gains = [4.0, 1.0];
        let budget = 1.0;
        let p = water_fill(&gains, budget).unwrap();
        let rate = |x: f64| (1.0 + 4.0 * x).log2() + (1.0 + (budget - x)).log2();
        let mut best_x = 0.0;
        let mut best = f64::NEG_INFINITY;
        let n = 100_000;
        for i in 0..=n {
            let x = budget * i as f64 / n as f64;
            let r = rate(x);
            if r > best {
                best = r;
                best_x = x;
            }
        }
        assert!((p[0] - best_x).abs() < 1e-4, "{} vs {}", p[0], best_x);
        assert!((p[0] + p[1] - budget).abs() < 1e-9);
    }

    #[test]
    fn water_fill_rejects_degenerate_input() {
        assert!(water_fill(&[0.0, 0.0], 1.0).is_err());
        assert!(water_fill(&[1.0], 0.0).is_err());
    }

    #[test]
    fn entropy_values() {
        assert_relative_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(
            binary_entropy(0.25).unwrap(),
            0.8112781244591328,
            epsilon = 1e-12
        );
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn marchenko_pastur_edge_values() {
        assert_eq!(marchenko_pastur_edges(1.0).unwrap(), (0.0, 4.0));
        let (a, b) = marchenko_pastur_edges(4.0).unwrap();
        assert_relative_eq!(a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b, 9.0, epsilon = 1e-12);
        let (a, b) = marchenko_pastur_edges(2.0).unwrap();
        assert_relative_eq!(a, (2f64.sqrt() - 1.0).powi(2), epsilon = 1e-12);
        assert_relative_eq!(b, (2f64.sqrt() + 1.0).powi(2), epsilon = 1e-12);
        assert!(marchenko_pastur_edges(0.5).is_err());
    }

    proptest! {
        #[test]
        fn logdet_monotone_in_scale_and_rows(seed in 0u64..500, s1 in 0.01f64..2.0, ds in 0.0f64..3.0) {
            let m = random_matrix(4, 3, seed);
            let v1 = logdet_gram(&m, s1).unwrap();
            let v2 = logdet_gram(&m, s1 + ds).unwrap();
            prop_assert!(v2 >= v1 - 1e-9);

            // appending a row can only grow the value
            let mut data: Vec<f64> = (0..12).map(|i| m.get(i / 3, i % 3)).collect();
            data.extend((0..3).map(|i| crate::rng::std_normal(&[seed ^ 0xabc, i])));
            let bigger = RealMatrix::new(5, 3, data).unwrap();
            prop_assert!(logdet_gram(&bigger, s1).unwrap() >= v1 - 1e-9);
        }

        #[test]
        fn logdet_orientation_agreement(seed in 0u64..500) {
            let m = random_matrix(3, 5, seed);
            let v = logdet_gram(&m, 0.9).unwrap();
            let vt = logdet_gram(&m.transposed(), 0.9).unwrap();
            prop_assert!((v - vt).abs() <= 1e-9 * v.abs().max(1.0));
        }

        #[test]
        fn schur_output_is_psd(seed in 0u64..300) {
            let m = random_matrix(4, 4, seed);
            let g = PsdMatrix::from_dmatrix(m.as_dmatrix() * m.as_dmatrix().transpose()).unwrap();
            let c = conditional_covariance(&g, &[0, 2]).unwrap();
            let eigs = sym_eigenvalues(c.as_dmatrix());
            let trace: f64 = (0..c.dim()).map(|i| c.get(i, i)).sum();
            prop_assert!(eigs.iter().all(|&l| l >= -1e-9 * trace.max(1.0)));
        }

        #[test]
        fn water_fill_kkt(seed in 0u64..300, budget in 0.1f64..10.0) {
            let gains: Vec<f64> = (0..5)
                .map(|i| crate::rng::uniform(&[seed, i as u64]) * 4.0)
                .collect();
            let p = water_fill(&gains, budget).unwrap();
            prop_assert!((p.iter().sum::<f64>() - budget).abs() < 1e-9);
            let levels: Vec<f64> = gains
                .iter()
                .zip(&p)
                .filter(|(_, &pi)| pi > 1e-12)
                .map(|(&g, &pi)| 1.0 / g + pi)
                .collect();
            // active channels share the water level
            for w in levels.windows(2) {
                prop_assert!((w[0] - w[1]).abs() < 1e-8);
            }
            if let Some(&mu) = levels.first() {
                // inactive channels sit above the water line
                for (&g, &pi) in gains.iter().zip(&p) {
                    if pi <= 1e-12 && g > 0.0 {
                        prop_assert!(1.0 / g >= mu - 1e-8);
                    }
                }
            }
        }

        #[test]
        fn mp_edges_product_identity(rho in 1.0f64..50.0) {
            let (a, b) = marchenko_pastur_edges(rho).unwrap();
            prop_assert!((a * b - (rho - 1.0).powi(2)).abs() < 1e-12 * (rho * rho).max(1.0));
        }
    }
}
