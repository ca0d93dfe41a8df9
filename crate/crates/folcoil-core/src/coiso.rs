//! General-codimension machinery: foliated charts (y, q) with λ = a_i dyⁱ and
//! transverse distribution G = ⟨∂_yⁱ + R^α_i ∂_{q^α}⟩, the Φ/Ψ matrices, the
//! transverse curvature F^α_ij, the A/B tensors and the master-equation
//! residual A_{βα} − A_{αβ} = B_{iα} ω^{ij} B_{jβ}, the lifted symplectic
//! basis pairings, the Ω-matrix identities, the general twisted differential,
//! and singular-value rank oracles.

use nalgebra::DMatrix;

use crate::error::{FolError, Result};
use crate::field::ScalarField;
use crate::foliation::FoliationChart;
use crate::forms::{FullForm, TangentialForm};
use crate::grid::GridRef;

/// Relative singular-value threshold for rank decisions; spectral data is
/// accurate to ~1e-10, leaving four orders of margin.
pub const RANK_THRESHOLD: f64 = 1e-6;

/// Condition-number bound past which pointwise matrices count as degenerate.
pub const COND_LIMIT: f64 = 1e8;

/// Foliated chart for a coisotropic submanifold of general codimension:
/// axes (y¹..y^{2k+1}, q¹..q^{n−k}), leaves {y = const}.
#[derive(Debug, Clone)]
pub struct CoisoChart {
    grid: GridRef,
    n: usize,
    k: usize,
    a: Vec<ScalarField>,
    /// rmat[α][i] = R^α_i.
    rmat: Vec<Vec<ScalarField>>,
    /// b[i][j]: pointwise basis of a^⊥, 2k rows.
    b: Vec<Vec<ScalarField>>,
}

impl CoisoChart {
    pub fn new(
        grid: GridRef,
        n: usize,
        k: usize,
        a: Vec<ScalarField>,
        rmat: Vec<Vec<ScalarField>>,
        b: Vec<Vec<ScalarField>>,
    ) -> Result<Self> {
        if k < 1 || k + 1 > n {
            return Err(FolError::Invalid(format!(
                "need 1 <= k <= n-1, got n={n}, k={k}"
            )));
        }
        let ny = 2 * k + 1;
        let nq = n - k;
        if grid.dim() != ny + nq {
            return Err(FolError::Invalid(format!(
                "chart grid must have {} axes, got {}",
                ny + nq,
                grid.dim()
            )));
        }
        if a.len() != ny || rmat.len() != nq || b.len() != 2 * k {
            return Err(FolError::Invalid("chart field shape mismatch".to_string()));
        }
        for row in rmat.iter() {
            if row.len() != ny {
                return Err(FolError::Invalid("R must be (n-k) x (2k+1)".to_string()));
            }
        }
        for row in b.iter() {
            if row.len() != ny {
                return Err(FolError::Invalid("b must be 2k x (2k+1)".to_string()));
            }
        }
        let chart = CoisoChart {
            grid,
            n,
            k,
            a,
            rmat,
            b,
        };
        chart.check_invariants()?;
        Ok(chart)
    }

    /// The canonical worked chart: T⁴ with axes (y¹,y²,y³,q¹), n = 2, k = 1,
    /// a = (cos y³, sin y³, 0), b₁ = (−sin y³, cos y³, 0), b₂ = (0,0,1), and
    /// optionally R¹ = (0, 0, sin q¹).
    pub fn worked_t4(resolution: usize, with_r: bool) -> Result<Self> {
        let grid = crate::grid::PeriodicGrid::uniform(&["y1", "y2", "y3", "q1"], resolution)?;
        let a = vec![
            ScalarField::from_fn(grid.clone(), |c| c[2].cos()),
            ScalarField::from_fn(grid.clone(), |c| c[2].sin()),
            ScalarField::zeros(grid.clone()),
        ];
        let b = vec![
            vec![
                ScalarField::from_fn(grid.clone(), |c| -c[2].sin()),
                ScalarField::from_fn(grid.clone(), |c| c[2].cos()),
                ScalarField::zeros(grid.clone()),
            ],
            vec![
                ScalarField::zeros(grid.clone()),
                ScalarField::zeros(grid.clone()),
                ScalarField::constant(grid.clone(), 1.0),
            ],
        ];
        let r1 = if with_r {
            vec![
                ScalarField::zeros(grid.clone()),
                ScalarField::zeros(grid.clone()),
                ScalarField::from_fn(grid.clone(), |c| c[3].sin()),
            ]
        } else {
            vec![
                ScalarField::zeros(grid.clone()),
                ScalarField::zeros(grid.clone()),
                ScalarField::zeros(grid.clone()),
            ]
        };
        Self::new(grid, 2, 1, a, vec![r1], b)
    }

    fn check_invariants(&self) -> Result<()> {
        let len = self.grid.len();
        let ny = 2 * self.k + 1;
        // |a|² > 0 and a·b_i ≈ 0 pointwise; b rows pointwise independent.
        let mut min_a2 = f64::INFINITY;
        let mut max_ab = 0.0f64;
        let mut min_b_sv = f64::INFINITY;
        let mut bmat = DMatrix::zeros(2 * self.k, ny);
        for idx in 0..len {
            let mut a2 = 0.0;
            for i in 0..ny {
                a2 += self.a[i].values()[idx].powi(2);
            }
            min_a2 = min_a2.min(a2);
            for bi in &self.b {
                let dot: f64 = (0..ny)
                    .map(|j| self.a[j].values()[idx] * bi[j].values()[idx])
                    .sum();
                max_ab = max_ab.max(dot.abs());
            }
            if idx % 97 == 0 {
                // Singular values of b on a subsample; b is smooth so this
                // bounds the minimum well.
                for (r, bi) in self.b.iter().enumerate() {
                    for j in 0..ny {
                        bmat[(r, j)] = bi[j].values()[idx];
                    }
                }
                let sv = bmat.clone().singular_values();
                min_b_sv = min_b_sv.min(sv[sv.len() - 1]);
            }
        }
        if min_a2 <= 0.0 {
            return Err(FolError::Invalid(format!(
                "|a|² must be positive (min {min_a2:.3e})"
            )));
        }
        if max_ab > 1e-12 * min_a2.sqrt().max(1.0) {
            return Err(FolError::Invalid(format!(
                "b rows must be pointwise orthogonal to a (max |a·b| = {max_ab:.3e})"
            )));
        }
        if min_b_sv <= 1e-8 {
            return Err(FolError::Invalid(format!(
                "b rows degenerate (min singular value {min_b_sv:.3e})"
            )));
        }
        // dλ(𝔤_i, 𝔤_j) pointwise invertible at s = 0.
        let omega0 = self.omega_matrix_fields(None)?;
        let mut min_det = f64::INFINITY;
        for idx in 0..len {
            let m = gather(&omega0, 2 * self.k, idx);
            min_det = min_det.min(m.determinant().abs());
        }
        if min_det <= 1e-10 {
            return Err(FolError::RankDegeneracy(min_det));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn a(&self) -> &[ScalarField] {
        &self.a
    }

    pub fn rmat(&self) -> &[Vec<ScalarField>] {
        &self.rmat
    }

    pub fn b(&self) -> &[Vec<ScalarField>] {
        &self.b
    }

    fn ny(&self) -> usize {
        2 * self.k + 1
    }

    fn nq(&self) -> usize {
        self.n - self.k
    }

    /// Grid axis position of yⁱ.
    fn y_axis(&self, i: usize) -> usize {
        i
    }

    /// Grid axis position of q^α.
    fn q_axis(&self, alpha: usize) -> usize {
        self.ny() + alpha
    }

    /// λ = a_i dyⁱ as an ambient one-form.
    pub fn lambda(&self) -> FullForm {
        let mut coeffs = self.a.clone();
        for _ in 0..self.nq() {
            coeffs.push(ScalarField::zeros(self.grid.clone()));
        }
        FullForm::one_form(self.grid.clone(), coeffs).expect("valid one-form")
    }

    pub fn tangential_one_form(&self, coefficients: Vec<ScalarField>) -> Result<TangentialForm> {
        TangentialForm::one_form(self.grid.clone(), self.leaf_axes(), coefficients)
    }

    /// The 𝔤-frame of G ∩ ker λ: 𝔤_i = b_ij (∂_yʲ + R^γ_j ∂_{q^γ}) as vector
    /// fields with one component per grid axis.
    pub fn g_frame(&self) -> Result<Vec<Vec<ScalarField>>> {
        let mut frame = Vec::with_capacity(2 * self.k);
        for bi in &self.b {
            let mut comp: Vec<ScalarField> = Vec::with_capacity(self.grid.dim());
            for j in 0..self.ny() {
                comp.push(bi[j].clone());
            }
            for gamma in 0..self.nq() {
                let mut acc = ScalarField::zeros(self.grid.clone());
                for j in 0..self.ny() {
                    acc = acc.add(&bi[j].mul_pointwise(&self.rmat[gamma][j])?)?;
                }
                comp.push(acc);
            }
            frame.push(comp);
        }
        Ok(frame)
    }

    /// ω_ij = dλ(𝔤_i, 𝔤_j) + F^α_ij s_α as 2k × 2k fields (strictly the full
    /// matrix; antisymmetry is a theorem checked in tests). `section = None`
    /// evaluates at s = 0.
    pub fn omega_matrix_fields(
        &self,
        section: Option<&GeneralSection>,
    ) -> Result<Vec<Vec<ScalarField>>> {
        let dim = self.grid.dim();
        let lambda = self.lambda();
        // dλ(e_r, e_c) = ∂_r λ_c − ∂_c λ_r.
        let mut dl = vec![vec![ScalarField::zeros(self.grid.clone()); dim]; dim];
        for r in 0..dim {
            for c in 0..dim {
                if r == c {
                    continue;
                }
                let lc = lambda.coefficient(&[c]).spectral_partial_axis(r);
                let lr = lambda.coefficient(&[r]).spectral_partial_axis(c);
                dl[r][c] = lc.sub(&lr)?;
            }
        }
        let frame = self.g_frame()?;
        let two_k = 2 * self.k;
        let mut omega = vec![vec![ScalarField::zeros(self.grid.clone()); two_k]; two_k];
        for i in 0..two_k {
            for j in 0..two_k {
                let mut acc = ScalarField::zeros(self.grid.clone());
                for r in 0..dim {
                    for c in 0..dim {
                        if r == c {
                            continue;
                        }
                        acc = acc.add(&frame[i][r].mul_pointwise(&frame[j][c])?.mul_pointwise(&dl[r][c])?)?;
                    }
                }
                omega[i][j] = acc;
            }
        }
        if let Some(s) = section {
            let curv = self.curvature()?;
            for i in 0..two_k {
                for j in 0..two_k {
                    for alpha in 0..self.nq() {
                        omega[i][j] = omega[i][j]
                            .add(&curv[alpha][i][j].mul_pointwise(&s.components()[alpha])?)?;
                    }
                }
            }
        }
        Ok(omega)
    }

    /// Transverse curvature F^α_ij = b_is b_jt (∂R^α_t/∂yˢ + R^β_s ∂R^α_t/∂q^β
    /// − ∂R^α_s/∂yᵗ − R^β_t ∂R^α_s/∂q^β); b is never differentiated, matching
    /// the projection Π killing the G-directions.
    pub fn curvature(&self) -> Result<Vec<Vec<Vec<ScalarField>>>> {
        let ny = self.ny();
        let nq = self.nq();
        let two_k = 2 * self.k;
        // kmat[α][s][t] = ∂R^α_t/∂yˢ + R^β_s ∂R^α_t/∂q^β.
        let mut kmat = vec![vec![vec![ScalarField::zeros(self.grid.clone()); ny]; ny]; nq];
        for alpha in 0..nq {
            for s in 0..ny {
                for t in 0..ny {
                    let mut acc = self.rmat[alpha][t].spectral_partial_axis(self.y_axis(s));
                    for beta in 0..nq {
                        let dq = self.rmat[alpha][t].spectral_partial_axis(self.q_axis(beta));
                        acc = acc.add(&self.rmat[beta][s].mul_pointwise(&dq)?)?;
                    }
                    kmat[alpha][s][t] = acc;
                }
            }
        }
        let mut f = vec![vec![vec![ScalarField::zeros(self.grid.clone()); two_k]; two_k]; nq];
        for alpha in 0..nq {
            for i in 0..two_k {
                for j in 0..two_k {
                    let mut acc = ScalarField::zeros(self.grid.clone());
                    for s in 0..ny {
                        for t in 0..ny {
                            let anti = kmat[alpha][s][t].sub(&kmat[alpha][t][s])?;
                            acc = acc.add(&self.b[i][s].mul_pointwise(&self.b[j][t])?.mul_pointwise(&anti)?)?;
                        }
                    }
                    f[alpha][i][j] = acc;
                }
            }
        }
        Ok(f)
    }
}

impl FoliationChart for CoisoChart {
    fn grid(&self) -> &GridRef {
        &self.grid
    }

    fn leaf_axes(&self) -> Vec<usize> {
        (self.ny()..self.grid.dim()).collect()
    }

    fn tangential_d(&self, omega: &TangentialForm) -> Result<TangentialForm> {
        if omega.degree() > 2 {
            return Err(FolError::UnsupportedDegree {
                op: "tangential_d",
                degree: omega.degree(),
            });
        }
        omega.coordinate_leaf_d()
    }

    fn mu(&self) -> Result<TangentialForm> {
        // μ_α = Σ_i (a_i/|a|²) ∂a_i/∂q^α = d_F(log |a|).
        let mut a2 = ScalarField::zeros(self.grid.clone());
        for ai in &self.a {
            a2 = a2.add(&ai.mul_pointwise(ai)?)?;
        }
        let log_norm = a2.map(|v| 0.5 * v.ln());
        let coeffs = (0..self.nq())
            .map(|alpha| log_norm.spectral_partial_axis(self.q_axis(alpha)))
            .collect();
        self.tangential_one_form(coeffs)
    }

    fn lift(&self, omega: &TangentialForm) -> Result<FullForm> {
        if omega.degree() != 1 {
            return Err(FolError::UnsupportedDegree {
                op: "lift",
                degree: omega.degree(),
            });
        }
        // s̄ = s_α dq^α − (R^β_i s_β) dyⁱ vanishes on G.
        let mut coeffs = Vec::with_capacity(self.grid.dim());
        for i in 0..self.ny() {
            let mut acc = ScalarField::zeros(self.grid.clone());
            for beta in 0..self.nq() {
                acc = acc.sub(&self.rmat[beta][i].mul_pointwise(&omega.coefficient(&[beta]))?)?;
            }
            coeffs.push(acc);
        }
        for alpha in 0..self.nq() {
            coeffs.push(omega.coefficient(&[alpha]));
        }
        FullForm::one_form(self.grid.clone(), coeffs)
    }

    fn project(&self, sigma: &FullForm) -> Result<TangentialForm> {
        let ny = self.ny();
        let out = TangentialForm::zero(self.grid.clone(), self.leaf_axes(), sigma.degree());
        out.map_components(|index, _| {
            let grid_index: Vec<usize> = index.iter().map(|&i| i + ny).collect();
            Ok(sigma.coefficient(&grid_index))
        })
    }
}

/// Section of the leafwise cotangent bundle: p_α = s_α(y, q).
#[derive(Debug, Clone)]
pub struct GeneralSection {
    chart: CoisoChart,
    s: Vec<ScalarField>,
}

impl GeneralSection {
    pub fn new(chart: CoisoChart, s: Vec<ScalarField>) -> Result<Self> {
        if s.len() != chart.nq() {
            return Err(FolError::Invalid(format!(
                "expected {} section components, got {}",
                chart.nq(),
                s.len()
            )));
        }
        let section = GeneralSection { chart, s };
        // Φ and Ψ must stay invertible along the graph.
        let jet = section.jet()?;
        let mut worst = 0.0f64;
        for idx in (0..section.chart.grid.len()).step_by(23) {
            let pp = section.point_matrices(&jet, idx)?;
            worst = worst.max(pp.phi_cond).max(pp.psi_cond);
        }
        if worst > COND_LIMIT {
            return Err(FolError::ChartDegenerate(worst));
        }
        Ok(section)
    }

    pub fn zero(chart: CoisoChart) -> Self {
        let s = (0..chart.nq())
            .map(|_| ScalarField::zeros(chart.grid.clone()))
            .collect();
        GeneralSection { chart, s }
    }

    pub fn chart(&self) -> &CoisoChart {
        &self.chart
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.s
    }

    pub fn as_tangential(&self) -> TangentialForm {
        self.chart
            .tangential_one_form(self.s.clone())
            .expect("validated at construction")
    }

    fn jet(&self) -> Result<CoisoJet> {
        CoisoJet::new(self)
    }
}

/// Spectral derivatives of chart and section data shared by the tensor
/// evaluators. All Φ-derivatives are at fixed p, evaluated on the graph.
pub struct CoisoJet {
    pub phi1: Vec<ScalarField>,          // Φ_1j = a_j + s_α R^α_j
    pub phi1_y: Vec<Vec<ScalarField>>,   // [j][t]: ∂Φ_1j/∂yᵗ at fixed p
    pub phi1_q: Vec<Vec<ScalarField>>,   // [j][β]: ∂Φ_1j/∂q^β at fixed p
    pub s_y: Vec<Vec<ScalarField>>,      // [γ][j]: ∂s_γ/∂yʲ
    pub s_q: Vec<Vec<ScalarField>>,      // [γ][β]: ∂s_γ/∂q^β
    pub phi_inv_col: Vec<ScalarField>,   // Φ^{i1} along the graph
}

fn gather(fields: &[Vec<ScalarField>], size: usize, idx: usize) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |r, c| fields[r][c].values()[idx])
}

impl CoisoJet {
    fn new(section: &GeneralSection) -> Result<Self> {
        let chart = &section.chart;
        let ny = chart.ny();
        let nq = chart.nq();
        let grid = chart.grid.clone();

        let mut phi1 = Vec::with_capacity(ny);
        for j in 0..ny {
            let mut acc = chart.a[j].clone();
            for alpha in 0..nq {
                acc = acc.add(&section.s[alpha].mul_pointwise(&chart.rmat[alpha][j])?)?;
            }
            phi1.push(acc);
        }
        let mut phi1_y = vec![vec![ScalarField::zeros(grid.clone()); ny]; ny];
        let mut phi1_q = vec![vec![ScalarField::zeros(grid.clone()); nq]; ny];
        for j in 0..ny {
            for t in 0..ny {
                let mut acc = chart.a[j].spectral_partial_axis(chart.y_axis(t));
                for alpha in 0..nq {
                    let dr = chart.rmat[alpha][j].spectral_partial_axis(chart.y_axis(t));
                    acc = acc.add(&section.s[alpha].mul_pointwise(&dr)?)?;
                }
                phi1_y[j][t] = acc;
            }
            for beta in 0..nq {
                let mut acc = chart.a[j].spectral_partial_axis(chart.q_axis(beta));
                for alpha in 0..nq {
                    let dr = chart.rmat[alpha][j].spectral_partial_axis(chart.q_axis(beta));
                    acc = acc.add(&section.s[alpha].mul_pointwise(&dr)?)?;
                }
                phi1_q[j][beta] = acc;
            }
        }
        let s_y: Vec<Vec<ScalarField>> = section
            .s
            .iter()
            .map(|sg| {
                (0..ny)
                    .map(|j| sg.spectral_partial_axis(chart.y_axis(j)))
                    .collect()
            })
            .collect();
        let s_q: Vec<Vec<ScalarField>> = section
            .s
            .iter()
            .map(|sg| {
                (0..nq)
                    .map(|b| sg.spectral_partial_axis(chart.q_axis(b)))
                    .collect()
            })
            .collect();

        // Φ^{i1} pointwise: solve Φᵀ? No: Φ v = e₁ gives the first column of
        // the inverse.
        let len = grid.len();
        let mut cols = vec![vec![0.0f64; len]; ny];
        let mut phi = DMatrix::zeros(ny, ny);
        for idx in 0..len {
            for j in 0..ny {
                phi[(0, j)] = phi1[j].values()[idx];
                for r in 0..2 * chart.k {
                    phi[(r + 1, j)] = chart.b[r][j].values()[idx];
                }
            }
            let lu = phi.clone().lu();
            let mut e1 = nalgebra::DVector::zeros(ny);
            e1[0] = 1.0;
            let sol = lu
                .solve(&e1)
                .ok_or_else(|| FolError::ChartDegenerate(f64::INFINITY))?;
            for i in 0..ny {
                cols[i][idx] = sol[i];
            }
        }
        let phi_inv_col = cols
            .into_iter()
            .map(|vals| ScalarField::new(grid.clone(), vals))
            .collect::<Result<Vec<_>>>()?;

        Ok(CoisoJet {
            phi1,
            phi1_y,
            phi1_q,
            s_y,
            s_q,
            phi_inv_col,
        })
    }
}

/// The Φ and Ψ matrices with inverses at one grid node.
pub struct PointMatrices {
    pub phi: DMatrix<f64>,
    pub phi_inv: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub psi_inv: DMatrix<f64>,
    pub phi_cond: f64,
    pub psi_cond: f64,
}

impl GeneralSection {
    /// Assemble Φ, Ψ and their inverses at a grid node.
    pub fn point_matrices(&self, jet: &CoisoJet, idx: usize) -> Result<PointMatrices> {
        let chart = &self.chart;
        let ny = chart.ny();
        let nq = chart.nq();
        let mut phi = DMatrix::zeros(ny, ny);
        for j in 0..ny {
            phi[(0, j)] = jet.phi1[j].values()[idx];
            for r in 0..2 * chart.k {
                phi[(r + 1, j)] = chart.b[r][j].values()[idx];
            }
        }
        let svd = phi.clone().singular_values();
        let phi_cond = svd[0] / svd[ny - 1].max(f64::MIN_POSITIVE);
        let phi_inv = phi
            .clone()
            .try_inverse()
            .ok_or(FolError::ChartDegenerate(phi_cond))?;
        // Ψ_{αβ} = δ_{αβ} − s_α Φ^{i1} R^β_i.
        let mut psi: DMatrix<f64> = DMatrix::identity(nq, nq);
        for alpha in 0..nq {
            for beta in 0..nq {
                let mut c = 0.0;
                for i in 0..ny {
                    c += phi_inv[(i, 0)] * chart.rmat[beta][i].values()[idx];
                }
                psi[(alpha, beta)] -= self.s[alpha].values()[idx] * c;
            }
        }
        let svp = psi.clone().singular_values();
        let psi_cond = svp[0] / svp[nq - 1].max(f64::MIN_POSITIVE);
        let psi_inv = psi
            .clone()
            .try_inverse()
            .ok_or(FolError::ChartDegenerate(psi_cond))?;
        if phi_cond > COND_LIMIT || psi_cond > COND_LIMIT {
            return Err(FolError::ChartDegenerate(phi_cond.max(psi_cond)));
        }
        Ok(PointMatrices {
            phi,
            phi_inv,
            psi,
            psi_inv,
            phi_cond,
            psi_cond,
        })
    }
}

/// Public entry matching the per-point op: Φ, Ψ and inverses at a node.
pub fn phi_psi(section: &GeneralSection, idx: usize) -> Result<PointMatrices> {
    let jet = section.jet()?;
    section.point_matrices(&jet, idx)
}

/// The A and B tensors of the graph tangent decomposition, as fields.
pub struct AbTensors {
    /// a_mat[α][β] = A_{αβ}.
    pub a_mat: Vec<Vec<ScalarField>>,
    /// b_mat[i][α] = B_{iα}.
    pub b_mat: Vec<Vec<ScalarField>>,
}

pub fn ab_tensors(section: &GeneralSection) -> Result<AbTensors> {
    let chart = section.chart();
    let jet = section.jet()?;
    ab_tensors_with(section, &jet, chart)
}

fn ab_tensors_with(
    section: &GeneralSection,
    jet: &CoisoJet,
    chart: &CoisoChart,
) -> Result<AbTensors> {
    let ny = chart.ny();
    let nq = chart.nq();
    let grid = chart.grid.clone();
    let s = section.components();

    // c[γ] = Φ^{i1} R^γ_i, so Ψ_{αγ} = δ_{αγ} − s_α c[γ].
    let mut c = Vec::with_capacity(nq);
    for gamma in 0..nq {
        let mut acc = ScalarField::zeros(grid.clone());
        for i in 0..ny {
            acc = acc.add(&jet.phi_inv_col[i].mul_pointwise(&chart.rmat[gamma][i])?)?;
        }
        c.push(acc);
    }
    // d[γ][α] = s_α Φ^{i1} ∂s_γ/∂yⁱ + ∂s_γ/∂q^α.
    let mut d = vec![vec![ScalarField::zeros(grid.clone()); nq]; nq];
    for gamma in 0..nq {
        let mut ydot = ScalarField::zeros(grid.clone());
        for i in 0..ny {
            ydot = ydot.add(&jet.phi_inv_col[i].mul_pointwise(&jet.s_y[gamma][i])?)?;
        }
        for alpha in 0..nq {
            d[gamma][alpha] = s[alpha].mul_pointwise(&ydot)?.add(&jet.s_q[gamma][alpha])?;
        }
    }
    // p[α] = Φ^{i1} (∂a_i/∂q^α + s_γ ∂R^γ_i/∂q^α) = Φ^{i1} ∂Φ_{1i}/∂q^α |ₚ.
    let mut p = Vec::with_capacity(nq);
    for alpha in 0..nq {
        let mut acc = ScalarField::zeros(grid.clone());
        for i in 0..ny {
            acc = acc.add(&jet.phi_inv_col[i].mul_pointwise(&jet.phi1_q[i][alpha])?)?;
        }
        p.push(acc);
    }
    // A_{αβ} = Σ_γ d[γ][α] Ψ_{βγ} − s_β p[α]
    //        = d[β][α] − s_β (Σ_γ d[γ][α] c[γ]) − s_β p[α].
    let mut a_mat = vec![vec![ScalarField::zeros(grid.clone()); nq]; nq];
    for alpha in 0..nq {
        let mut dc = ScalarField::zeros(grid.clone());
        for gamma in 0..nq {
            dc = dc.add(&d[gamma][alpha].mul_pointwise(&c[gamma])?)?;
        }
        for beta in 0..nq {
            a_mat[alpha][beta] = d[beta][alpha]
                .sub(&s[beta].mul_pointwise(&dc)?)?
                .sub(&s[beta].mul_pointwise(&p[alpha])?)?;
        }
    }

    // g[γ][j] = ∂s_γ/∂yʲ + R^ν_j ∂s_γ/∂q^ν.
    let mut gmat = vec![vec![ScalarField::zeros(grid.clone()); ny]; nq];
    for gamma in 0..nq {
        for j in 0..ny {
            let mut acc = jet.s_y[gamma][j].clone();
            for nu in 0..nq {
                acc = acc.add(&chart.rmat[nu][j].mul_pointwise(&jet.s_q[gamma][nu])?)?;
            }
            gmat[gamma][j] = acc;
        }
    }
    // curl[j] = Φ^{s1} (∂Φ_{1j}/∂yˢ − ∂Φ_{1s}/∂yʲ).
    let mut curl = Vec::with_capacity(ny);
    for j in 0..ny {
        let mut acc = ScalarField::zeros(grid.clone());
        for t in 0..ny {
            let anti = jet.phi1_y[j][t].sub(&jet.phi1_y[t][j])?;
            acc = acc.add(&jet.phi_inv_col[t].mul_pointwise(&anti)?)?;
        }
        curl.push(acc);
    }
    // qdot[ν] = Φ^{s1} ∂Φ_{1s}/∂q^ν.
    let mut qdot = Vec::with_capacity(nq);
    for nu in 0..nq {
        let mut acc = ScalarField::zeros(grid.clone());
        for t in 0..ny {
            acc = acc.add(&jet.phi_inv_col[t].mul_pointwise(&jet.phi1_q[t][nu])?)?;
        }
        qdot.push(acc);
    }
    // B_{iα} = b_ij ( (∂s_γ/∂yʲ + R^ν_j ∂s_γ/∂q^ν) Ψ_{αγ}
    //          + s_α Φ^{s1}(∂Φ_{1j}/∂yˢ − ∂Φ_{1s}/∂yʲ) + ∂Φ_{1j}/∂q^α
    //          − s_α R^ν_j Φ^{s1} ∂Φ_{1s}/∂q^ν ).
    let two_k = 2 * chart.k;
    let mut b_mat = vec![vec![ScalarField::zeros(grid.clone()); nq]; two_k];
    for i in 0..two_k {
        for alpha in 0..nq {
            let mut acc = ScalarField::zeros(grid.clone());
            for j in 0..ny {
                // Ψ_{αγ} contraction: g[α][j] − s_α Σ_γ c[γ] g[γ][j].
                let mut gpsi = gmat[alpha][j].clone();
                let mut cg = ScalarField::zeros(grid.clone());
                for gamma in 0..nq {
                    cg = cg.add(&c[gamma].mul_pointwise(&gmat[gamma][j])?)?;
                }
                gpsi = gpsi.sub(&s[alpha].mul_pointwise(&cg)?)?;

                let mut term = gpsi
                    .add(&s[alpha].mul_pointwise(&curl[j])?)?
                    .add(&jet.phi1_q[j][alpha])?;
                let mut rq = ScalarField::zeros(grid.clone());
                for nu in 0..nq {
                    rq = rq.add(&chart.rmat[nu][j].mul_pointwise(&qdot[nu])?)?;
                }
                term = term.sub(&s[alpha].mul_pointwise(&rq)?)?;
                acc = acc.add(&chart.b[i][j].mul_pointwise(&term)?)?;
            }
            b_mat[i][alpha] = acc;
        }
    }
    Ok(AbTensors { a_mat, b_mat })
}

/// The closed-form pair defect A_{αβ} − A_{βα} (the explicit LHS expansion),
/// evaluated independently of `ab_tensors` for cross-checking. Here
/// ∂Φ_{1i}/∂q^β is the derivative of the composite Φ_{1i} = a_i + s_γ R^γ_i
/// along the graph (the Ψ-corrections in A fold the ∂s terms into it), taken
/// spectrally on the assembled field.
pub fn lhs_closed_form(section: &GeneralSection) -> Result<Vec<Vec<ScalarField>>> {
    let chart = section.chart();
    let jet = section.jet()?;
    let nq = chart.nq();
    let ny = chart.ny();
    let grid = chart.grid.clone();
    let s = section.components();
    let mut out = vec![vec![ScalarField::zeros(grid.clone()); nq]; nq];
    for alpha in 0..nq {
        for beta in 0..nq {
            // ∂s_β/∂q^α − ∂s_α/∂q^β
            let mut acc = jet.s_q[beta][alpha].sub(&jet.s_q[alpha][beta])?;
            // + Φ^{i1} s_α (∂Φ_{1i}/∂q^β + ∂s_β/∂yⁱ)
            // − Φ^{i1} s_β (∂Φ_{1i}/∂q^α + ∂s_α/∂yⁱ)
            for i in 0..ny {
                let comp_b = jet.phi1[i].spectral_partial_axis(chart.q_axis(beta));
                let comp_a = jet.phi1[i].spectral_partial_axis(chart.q_axis(alpha));
                let plus = comp_b.add(&jet.s_y[beta][i])?;
                let minus = comp_a.add(&jet.s_y[alpha][i])?;
                acc = acc
                    .add(&jet.phi_inv_col[i].mul_pointwise(&s[alpha].mul_pointwise(&plus)?)?)?
                    .sub(&jet.phi_inv_col[i].mul_pointwise(&s[beta].mul_pointwise(&minus)?)?)?;
            }
            out[alpha][beta] = acc;
        }
    }
    Ok(out)
}

/// Master-equation residual of the graph: (A_{βα} − A_{αβ}) − B_{iα} ω^{ij} B_{jβ},
/// with ω_ij = dλ(𝔤_i,𝔤_j) + F^α_ij s_α pointwise inverted.
pub struct OmegaResidual {
    pub omega: Vec<Vec<ScalarField>>,
    pub residual: Vec<Vec<ScalarField>>,
    pub residual_max: f64,
}

pub fn omega_and_residual(section: &GeneralSection) -> Result<OmegaResidual> {
    let chart = section.chart();
    let two_k = 2 * chart.k;
    let nq = chart.nq();
    let grid = chart.grid.clone();
    let omega = chart.omega_matrix_fields(Some(section))?;
    let ab = ab_tensors(section)?;
    let len = grid.len();

    // Pointwise inverse of ω and the quadratic form B ω^{-1} B.
    let mut res_vals = vec![vec![vec![0.0f64; len]; nq]; nq];
    let mut om = DMatrix::zeros(two_k, two_k);
    let mut min_det = f64::INFINITY;
    for idx in 0..len {
        for i in 0..two_k {
            for j in 0..two_k {
                om[(i, j)] = omega[i][j].values()[idx];
            }
        }
        let det = om.determinant();
        min_det = min_det.min(det.abs());
        let inv = om
            .clone()
            .try_inverse()
            .ok_or(FolError::RankDegeneracy(det.abs()))?;
        for alpha in 0..nq {
            for beta in 0..nq {
                let lhs = ab.a_mat[beta][alpha].values()[idx] - ab.a_mat[alpha][beta].values()[idx];
                let mut quad = 0.0;
                for i in 0..two_k {
                    for j in 0..two_k {
                        quad += ab.b_mat[i][alpha].values()[idx]
                            * inv[(i, j)]
                            * ab.b_mat[j][beta].values()[idx];
                    }
                }
                res_vals[alpha][beta][idx] = lhs - quad;
            }
        }
    }
    if min_det <= 1e-12 {
        return Err(FolError::RankDegeneracy(min_det));
    }
    let mut residual = Vec::with_capacity(nq);
    let mut residual_max = 0.0f64;
    for alpha in 0..nq {
        let mut row = Vec::with_capacity(nq);
        for beta in 0..nq {
            let f = ScalarField::new(grid.clone(), std::mem::take(&mut res_vals[alpha][beta]))?;
            residual_max = residual_max.max(f.max_abs());
            row.push(f);
        }
        residual.push(row);
    }
    Ok(OmegaResidual {
        omega,
        residual,
        residual_max,
    })
}

/// Deviations of the lifted basis pairings from the symplectic normal form,
/// with the empirically realized sign of dα(e_α, f^β) = ±δ_α^β.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BasisPairingReport {
    pub max_ee: f64,
    pub max_ff: f64,
    pub max_ef_dev: f64,
    pub ef_sign: f64,
    pub max_eg: f64,
    pub max_fg: f64,
    pub max_gg_dev: f64,
}

impl BasisPairingReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_ee
            .max(self.max_ff)
            .max(self.max_ef_dev)
            .max(self.max_eg)
            .max(self.max_fg)
            .max(self.max_gg_dev)
    }
}

pub fn lifted_basis_check(
    section: &GeneralSection,
    points: &[usize],
) -> Result<BasisPairingReport> {
    let chart = section.chart();
    let jet = section.jet()?;
    let ny = chart.ny();
    let nq = chart.nq();
    let two_k = 2 * chart.k;
    let dim = ny + 2 * nq; // basis order: y, q, p
    let s = section.components();
    let curv = chart.curvature()?;
    let omega0 = chart.omega_matrix_fields(None)?;

    let mut report = BasisPairingReport {
        max_ee: 0.0,
        max_ff: 0.0,
        max_ef_dev: 0.0,
        ef_sign: 0.0,
        max_eg: 0.0,
        max_fg: 0.0,
        max_gg_dev: 0.0,
    };
    let mut ef_diag_sum = 0.0f64;

    for &idx in points {
        let pm = section.point_matrices(&jet, idx)?;
        let phi_col: Vec<f64> = (0..ny).map(|i| pm.phi_inv[(i, 0)]).collect();
        let p: Vec<f64> = (0..nq).map(|a| s[a].values()[idx]).collect();
        let r = |alpha: usize, i: usize| chart.rmat[alpha][i].values()[idx];
        let p1y = |j: usize, t: usize| jet.phi1_y[j][t].values()[idx];
        let p1q = |j: usize, b: usize| jet.phi1_q[j][b].values()[idx];

        // dα as an antisymmetric matrix over (y, q, p).
        let mut da = vec![vec![0.0f64; dim]; dim];
        for i in 0..ny {
            for j in 0..ny {
                da[i][j] = p1y(j, i) - p1y(i, j);
            }
        }
        for alpha in 0..nq {
            for i in 0..ny {
                da[ny + alpha][i] = p1q(i, alpha);
                da[i][ny + alpha] = -p1q(i, alpha);
            }
        }
        for alpha in 0..nq {
            for i in 0..ny {
                da[ny + nq + alpha][i] = r(alpha, i);
                da[i][ny + nq + alpha] = -r(alpha, i);
            }
            da[ny + nq + alpha][ny + alpha] = -1.0;
            da[ny + alpha][ny + nq + alpha] = 1.0;
        }
        let pair = |u: &[f64], v: &[f64]| -> f64 {
            let mut acc = 0.0;
            for (ri, &ur) in u.iter().enumerate() {
                if ur == 0.0 {
                    continue;
                }
                for (ci, &vc) in v.iter().enumerate() {
                    acc += ur * da[ri][ci] * vc;
                }
            }
            acc
        };

        // e_α = Ψ^{γα} ∂_{p_γ}.
        let mut e = vec![vec![0.0f64; dim]; nq];
        for alpha in 0..nq {
            for gamma in 0..nq {
                e[alpha][ny + nq + gamma] = pm.psi_inv[(gamma, alpha)];
            }
        }
        // f^β = ∂_{q^β} + p_β Φ^{i1} ∂_{yⁱ} + Ψ^{ησ} (∂Φ_{1j}/∂q^β) p_σ Φ^{j1} ∂_{p_η}.
        let mut fv = vec![vec![0.0f64; dim]; nq];
        for beta in 0..nq {
            fv[beta][ny + beta] = 1.0;
            for i in 0..ny {
                fv[beta][i] = p[beta] * phi_col[i];
            }
            for eta in 0..nq {
                let mut acc = 0.0;
                for sigma in 0..nq {
                    let mut jsum = 0.0;
                    for j in 0..ny {
                        jsum += p1q(j, beta) * phi_col[j];
                    }
                    acc += pm.psi_inv[(eta, sigma)] * p[sigma] * jsum;
                }
                fv[beta][ny + nq + eta] = acc;
            }
        }
        // g_i = b_ij ( ∂_yʲ + R^γ_j ∂_{q^γ}
        //        + Ψ^{ησ}(p_σ Φ^{s1} ∂Φ_{1s}/∂yʲ − p_σ Φ^{s1} ∂Φ_{1j}/∂yˢ
        //                 − ∂Φ_{1j}/∂q^σ + p_σ Φ^{s1} R^γ_j ∂Φ_{1s}/∂q^γ) ∂_{p_η} ).
        let mut gv = vec![vec![0.0f64; dim]; two_k];
        for i in 0..two_k {
            for j in 0..ny {
                let bij = chart.b[i][j].values()[idx];
                gv[i][j] += bij;
                for gamma in 0..nq {
                    gv[i][ny + gamma] += bij * r(gamma, j);
                }
                for eta in 0..nq {
                    let mut acc = 0.0;
                    for sigma in 0..nq {
                        let mut t = -p1q(j, sigma);
                        for sax in 0..ny {
                            t += p[sigma] * phi_col[sax] * p1y(sax, j);
                            t -= p[sigma] * phi_col[sax] * p1y(j, sax);
                            for gamma in 0..nq {
                                t += p[sigma] * phi_col[sax] * r(gamma, j) * p1q(sax, gamma);
                            }
                        }
                        acc += pm.psi_inv[(eta, sigma)] * t;
                    }
                    gv[i][ny + nq + eta] += bij * acc;
                }
            }
        }

        for alpha in 0..nq {
            for beta in 0..nq {
                report.max_ee = report.max_ee.max(pair(&e[alpha], &e[beta]).abs());
                report.max_ff = report.max_ff.max(pair(&fv[alpha], &fv[beta]).abs());
                let v = pair(&e[alpha], &fv[beta]);
                if alpha == beta {
                    ef_diag_sum += v;
                    report.max_ef_dev = report.max_ef_dev.max((v.abs() - 1.0).abs());
                } else {
                    report.max_ef_dev = report.max_ef_dev.max(v.abs());
                }
            }
        }
        for alpha in 0..nq {
            for i in 0..two_k {
                report.max_eg = report.max_eg.max(pair(&e[alpha], &gv[i]).abs());
                report.max_fg = report.max_fg.max(pair(&fv[alpha], &gv[i]).abs());
            }
        }
        for i in 0..two_k {
            for j in 0..two_k {
                let mut expect = omega0[i][j].values()[idx];
                for alpha in 0..nq {
                    expect += curv[alpha][i][j].values()[idx] * p[alpha];
                }
                let v = pair(&gv[i], &gv[j]);
                report.max_gg_dev = report.max_gg_dev.max((v - expect).abs());
            }
        }
    }
    report.ef_sign = if ef_diag_sum >= 0.0 { 1.0 } else { -1.0 };
    Ok(report)
}

/// Direct evaluation of d s̄(𝔊_i, 𝔊_j) + F^γ_ij s_γ (spectral d of the lifted
/// section, contracted against the 𝔊 frame) and the resolved sign relating
/// Ω_ij = d(λ − s̄)(𝔊_i, 𝔊_j) to ω_ij.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OmegaIdentityReport {
    pub identity_max: f64,
    pub omega_sign: f64,
    pub sign_dev: f64,
}

pub fn omega_identity_check(section: &GeneralSection) -> Result<OmegaIdentityReport> {
    let chart = section.chart();
    let two_k = 2 * chart.k;
    let s_bar = chart.lift(&section.as_tangential())?;
    let ds_bar = s_bar.exterior_d()?;
    let frame = chart.g_frame()?;
    let curv = chart.curvature()?;
    let omega = chart.omega_matrix_fields(Some(section))?;

    // ω(u, v) = i_v i_u ω for a two-form.
    let contract2 = |form: &FullForm, u: &[ScalarField], v: &[ScalarField]| -> Result<ScalarField> {
        let once = form.contract(u)?;
        Ok(once.contract(v)?.coefficient(&[]))
    };

    let mut identity_max = 0.0f64;
    let mut dot_cross = 0.0f64;
    let mut dot_self = 0.0f64;
    let lambda_minus = chart.lambda().sub(&s_bar)?;
    let d_lm = lambda_minus.exterior_d()?;
    for i in 0..two_k {
        for j in 0..two_k {
            let dsgg = contract2(&ds_bar, &frame[i], &frame[j])?;
            let mut with_curv = dsgg;
            for gamma in 0..chart.nq() {
                with_curv =
                    with_curv.add(&curv[gamma][i][j].mul_pointwise(&section.components()[gamma])?)?;
            }
            identity_max = identity_max.max(with_curv.max_abs());

            let big_omega = contract2(&d_lm, &frame[i], &frame[j])?;
            for (o, w) in big_omega.values().iter().zip(omega[i][j].values()) {
                dot_cross += o * w;
                dot_self += w * w;
            }
        }
    }
    let ratio = if dot_self > 0.0 {
        dot_cross / dot_self
    } else {
        0.0
    };
    let omega_sign = if ratio >= 0.0 { 1.0 } else { -1.0 };
    Ok(OmegaIdentityReport {
        identity_max,
        omega_sign,
        sign_dev: (ratio.abs() - 1.0).abs(),
    })
}

/// d_F^λ for the general chart: μ = d_F(log |a|).
pub fn general_twisted_d(chart: &CoisoChart, omega: &TangentialForm) -> Result<TangentialForm> {
    chart.twisted_d(omega)
}

/// Rank classification of dα restricted to a spanning set, by singular
/// values of the skew Gram matrix: coisotropic iff exactly `expected`
/// values exceed RANK_THRESHOLD · σ_max.
pub fn classify_gram_rank(gram: &DMatrix<f64>, expected: usize) -> (usize, bool) {
    let sv = gram.clone().singular_values();
    let smax = sv[0];
    if smax == 0.0 {
        return (0, expected == 0);
    }
    let rank = sv.iter().filter(|&&v| v > RANK_THRESHOLD * smax).count();
    (rank, rank == expected)
}

/// Per-point coisotropy verdicts from the rank of dα on TY_s ∩ ξ, fully
/// independent of the A/B/ω formulas.
pub struct RankClassification {
    pub ranks: Vec<usize>,
    pub coisotropic_everywhere: bool,
}

pub fn rank_oracle(section: &GeneralSection, points: &[usize]) -> Result<RankClassification> {
    let chart = section.chart();
    let jet = section.jet()?;
    let ny = chart.ny();
    let nq = chart.nq();
    let two_k = 2 * chart.k;
    let dim = ny + 2 * nq;
    let span = nq + two_k;
    let s = section.components();

    let mut ranks = Vec::with_capacity(points.len());
    let mut all = true;
    for &idx in points {
        let pm = section.point_matrices(&jet, idx)?;
        let phi_col: Vec<f64> = (0..ny).map(|i| pm.phi_inv[(i, 0)]).collect();
        let p1y = |j: usize, t: usize| jet.phi1_y[j][t].values()[idx];
        let p1q = |j: usize, b: usize| jet.phi1_q[j][b].values()[idx];
        let r = |alpha: usize, i: usize| chart.rmat[alpha][i].values()[idx];

        let mut da = vec![vec![0.0f64; dim]; dim];
        for i in 0..ny {
            for j in 0..ny {
                da[i][j] = p1y(j, i) - p1y(i, j);
            }
        }
        for alpha in 0..nq {
            for i in 0..ny {
                da[ny + alpha][i] = p1q(i, alpha);
                da[i][ny + alpha] = -p1q(i, alpha);
                da[ny + nq + alpha][i] = r(alpha, i);
                da[i][ny + nq + alpha] = -r(alpha, i);
            }
            da[ny + nq + alpha][ny + alpha] = -1.0;
            da[ny + alpha][ny + nq + alpha] = 1.0;
        }

        // Spanning set of TY_s ∩ ξ from the displayed formula.
        let mut vectors = vec![vec![0.0f64; dim]; span];
        for alpha in 0..nq {
            let v = &mut vectors[alpha];
            v[ny + alpha] = 1.0;
            for beta in 0..nq {
                v[ny + nq + beta] += jet.s_q[beta][alpha].values()[idx];
            }
            for i in 0..ny {
                let c = s[alpha].values()[idx] * phi_col[i];
                v[i] += c;
                for beta in 0..nq {
                    v[ny + nq + beta] += c * jet.s_y[beta][i].values()[idx];
                }
            }
        }
        for i in 0..two_k {
            let v = &mut vectors[nq + i];
            for j in 0..ny {
                let bij = chart.b[i][j].values()[idx];
                v[j] += bij;
                for beta in 0..nq {
                    v[ny + nq + beta] += bij * jet.s_y[beta][j].values()[idx];
                }
                for gamma in 0..nq {
                    v[ny + gamma] += bij * r(gamma, j);
                    for beta in 0..nq {
                        v[ny + nq + beta] += bij * r(gamma, j) * jet.s_q[beta][gamma].values()[idx];
                    }
                }
            }
        }

        let mut gram = DMatrix::zeros(span, span);
        for a_ix in 0..span {
            for b_ix in 0..span {
                let mut acc = 0.0;
                for ri in 0..dim {
                    for ci in 0..dim {
                        acc += vectors[a_ix][ri] * da[ri][ci] * vectors[b_ix][ci];
                    }
                }
                gram[(a_ix, b_ix)] = acc;
            }
        }
        let (rank, ok) = classify_gram_rank(&gram, two_k);
        ranks.push(rank);
        all &= ok;
    }
    Ok(RankClassification {
        ranks,
        coisotropic_everywhere: all,
    })
}

/// Rank of dα restricted to ker α per sample point on an arbitrary grid,
/// plus the characteristic-distribution dimension dim − rank − 1.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PrecontactReport {
    pub ranks: Vec<usize>,
    pub constant_rank: Option<usize>,
    pub characteristic_dim: Option<usize>,
}

pub fn precontact_rank(alpha: &FullForm, points: &[usize]) -> Result<PrecontactReport> {
    if alpha.degree() != 1 {
        return Err(FolError::UnsupportedDegree {
            op: "precontact_rank",
            degree: alpha.degree(),
        });
    }
    let grid = alpha.grid().clone();
    let dim = grid.dim();
    let dalpha = alpha.exterior_d()?;
    // Coefficient lookup for the two-form.
    let da_coef = |r: usize, c: usize, idx: usize| -> f64 {
        use std::cmp::Ordering;
        match r.cmp(&c) {
            Ordering::Less => dalpha.coefficient(&[r, c]).values()[idx],
            Ordering::Greater => -dalpha.coefficient(&[c, r]).values()[idx],
            Ordering::Equal => 0.0,
        }
    };
    let mut global_scale = 0.0f64;
    for comp in dalpha.components() {
        global_scale = global_scale.max(comp.field.max_abs());
    }

    let mut ranks = Vec::with_capacity(points.len());
    for &idx in points {
        let avec: Vec<f64> = (0..dim).map(|ax| alpha.coefficient(&[ax]).values()[idx]).collect();
        let norm = avec.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return Err(FolError::Invalid(
                "defining form vanishes at a sample point".to_string(),
            ));
        }
        // Orthonormal basis of ker α via projection of the coordinate frame.
        let unit: Vec<f64> = avec.iter().map(|v| v / norm).collect();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim - 1);
        for ax in 0..dim {
            let mut v = vec![0.0; dim];
            v[ax] = 1.0;
            let d: f64 = v.iter().zip(&unit).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(&unit) {
                *vi -= d * ui;
            }
            for bprev in &basis {
                let d: f64 = v.iter().zip(bprev).map(|(a, b)| a * b).sum();
                for (vi, bi) in v.iter_mut().zip(bprev) {
                    *vi -= d * bi;
                }
            }
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-8 {
                for vi in v.iter_mut() {
                    *vi /= n;
                }
                basis.push(v);
                if basis.len() == dim - 1 {
                    break;
                }
            }
        }
        let m = basis.len();
        let mut gram = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for r in 0..dim {
                    for c in 0..dim {
                        acc += basis[i][r] * da_coef(r, c, idx) * basis[j][c];
                    }
                }
                gram[(i, j)] = acc;
            }
        }
        let sv = gram.singular_values();
        let smax = sv[0].max(RANK_THRESHOLD * global_scale);
        let rank = if global_scale == 0.0 {
            0
        } else {
            sv.iter().filter(|&&v| v > RANK_THRESHOLD * smax).count()
        };
        ranks.push(rank);
    }
    let constant_rank = if ranks.windows(2).all(|w| w[0] == w[1]) {
        ranks.first().copied()
    } else {
        None
    };
    let characteristic_dim = constant_rank.map(|r| dim - r - 1);
    Ok(PrecontactReport {
        ranks,
        constant_rank,
        characteristic_dim,
    })
}
