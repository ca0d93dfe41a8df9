//! Foliated charts and the tangential calculus on them: the lift i_L and
//! projection π between leaf forms and ambient forms, the leafwise exterior
//! derivative, the twist one-form μ with dλ = μ̄ ∧ λ, and the twisted
//! differential d_F^λ = d_F − μ∧·.

use crate::error::{FolError, Result};
use crate::field::ScalarField;
use crate::forms::{FullForm, TangentialForm};
use crate::grid::GridRef;

/// Chart kinds are closed-world; every operation dispatches on this trait.
pub trait FoliationChart {
    fn grid(&self) -> &GridRef;

    /// Positions (into the grid axes) indexing the tangential component
    /// slots. For plaque charts these are the leaf coordinate axes; for the
    /// torus chart the single slot is carried by the x-axis with the g·dx
    /// identification.
    fn leaf_axes(&self) -> Vec<usize>;

    /// Leafwise exterior derivative d_F.
    fn tangential_d(&self, omega: &TangentialForm) -> Result<TangentialForm>;

    /// The tangential twist form μ with dλ = μ̄ ∧ λ.
    fn mu(&self) -> Result<TangentialForm>;

    /// Lift of a degree-1 tangential form to the ambient chart, vanishing on
    /// the transverse directions.
    fn lift(&self, omega: &TangentialForm) -> Result<FullForm>;

    /// Restriction of an ambient form to the leaf directions.
    fn project(&self, sigma: &FullForm) -> Result<TangentialForm>;

    /// d_F^λ ω = d_F ω − μ ∧ ω.
    fn twisted_d(&self, omega: &TangentialForm) -> Result<TangentialForm> {
        let d = self.tangential_d(omega)?;
        let mu = self.mu()?;
        d.sub(&mu.wedge(omega)?)
    }

    /// Twisted differential with an explicit twist form (used by the gauge
    /// chain-map check, where μ is shifted by d_F h).
    fn twisted_d_with(
        &self,
        omega: &TangentialForm,
        mu: &TangentialForm,
    ) -> Result<TangentialForm> {
        let d = self.tangential_d(omega)?;
        d.sub(&mu.wedge(omega)?)
    }
}

/// Foliated chart for a nonsingular Legendrian foliation: axes (x, q¹..qⁿ),
/// leaves {x = const}, defining form λ = f dx with f > 0, transverse line
/// field L = ⟨∂_x + Rⁱ ∂_{qⁱ}⟩.
#[derive(Debug, Clone)]
pub struct LegendrianChart {
    grid: GridRef,
    f: ScalarField,
    r: Vec<ScalarField>,
    /// Neighborhood bound factor: sections must stay below factor·min f.
    pub neighborhood_factor: f64,
}

impl LegendrianChart {
    pub fn new(f: ScalarField, r: Vec<ScalarField>) -> Result<Self> {
        let grid = f.grid().clone();
        if grid.dim() < 2 {
            return Err(FolError::Invalid(
                "legendrian chart needs at least one leaf axis".to_string(),
            ));
        }
        if r.len() != grid.dim() - 1 {
            return Err(FolError::Invalid(format!(
                "expected {} transverse coefficients, got {}",
                grid.dim() - 1,
                r.len()
            )));
        }
        let fmin = f.min();
        if fmin <= 0.0 {
            return Err(FolError::DefiningFormNotPositive(fmin));
        }
        for ri in &r {
            if !ri.grid().same_as(&grid) {
                return Err(FolError::GridMismatch(
                    "R coefficients must share the chart grid".to_string(),
                ));
            }
        }
        Ok(LegendrianChart {
            grid,
            f,
            r,
            neighborhood_factor: 0.2,
        })
    }

    /// Flat chart λ = dx, R ≡ 0 on the given grid; the T³ example is the
    /// n = 2 case of this.
    pub fn flat(grid: GridRef) -> Result<Self> {
        let f = ScalarField::constant(grid.clone(), 1.0);
        let n = grid.dim() - 1;
        let r = (0..n).map(|_| ScalarField::zeros(grid.clone())).collect();
        Self::new(f, r)
    }

    pub fn leaf_dim(&self) -> usize {
        self.grid.dim() - 1
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn r(&self) -> &[ScalarField] {
        &self.r
    }

    /// λ = f dx as an ambient one-form.
    pub fn lambda(&self) -> FullForm {
        let mut coeffs = vec![self.f.clone()];
        for _ in 0..self.leaf_dim() {
            coeffs.push(ScalarField::zeros(self.grid.clone()));
        }
        FullForm::one_form(self.grid.clone(), coeffs).expect("valid one-form")
    }

    /// Neighborhood bound for sections: factor · min f.
    pub fn neighborhood_bound(&self) -> f64 {
        self.neighborhood_factor * self.f.min()
    }

    pub fn tangential_zero(&self, degree: usize) -> TangentialForm {
        TangentialForm::zero(self.grid.clone(), self.leaf_axes(), degree)
    }

    pub fn tangential_one_form(&self, coefficients: Vec<ScalarField>) -> Result<TangentialForm> {
        TangentialForm::one_form(self.grid.clone(), self.leaf_axes(), coefficients)
    }
}

impl FoliationChart for LegendrianChart {
    fn grid(&self) -> &GridRef {
        &self.grid
    }

    fn leaf_axes(&self) -> Vec<usize> {
        (1..self.grid.dim()).collect()
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
        // μ = d_F(log f); the defining identity dλ = μ̄ ∧ λ reduces to this
        // closed form for λ = f dx. Differentiating log f (rather than the
        // pointwise ratio ∂f/f) keeps μ exactly closed.
        let logf = self.f.map_elementary(crate::field::Elementary::Log)?;
        let coeffs = self
            .leaf_axes()
            .into_iter()
            .map(|axis| logf.spectral_partial_axis(axis))
            .collect();
        self.tangential_one_form(coeffs)
    }

    fn lift(&self, omega: &TangentialForm) -> Result<FullForm> {
        if omega.degree() != 1 {
            return Err(FolError::UnsupportedDegree {
                op: "lift_L",
                degree: omega.degree(),
            });
        }
        // ω = a_i dqⁱ lifts to −Rʲa_j dx + a_i dqⁱ.
        let mut dx = ScalarField::zeros(self.grid.clone());
        let mut coeffs = Vec::with_capacity(self.grid.dim());
        for i in 0..self.leaf_dim() {
            let a = omega.coefficient(&[i]);
            dx = dx.sub(&self.r[i].mul(&a)?)?;
            coeffs.push(a);
        }
        let mut all = vec![dx];
        all.extend(coeffs);
        FullForm::one_form(self.grid.clone(), all)
    }

    fn project(&self, sigma: &FullForm) -> Result<TangentialForm> {
        if sigma.degree() > 3 {
            return Err(FolError::UnsupportedDegree {
                op: "project_pi",
                degree: sigma.degree(),
            });
        }
        // Leaves are coordinate plaques, so restriction keeps the components
        // whose multi-index avoids the transverse axis 0. Tangential slot i
        // corresponds to grid axis i + 1.
        let out = TangentialForm::zero(self.grid.clone(), self.leaf_axes(), sigma.degree());
        out.map_components(|index, _| {
            let grid_index: Vec<usize> = index.iter().map(|&i| i + 1).collect();
            Ok(sigma.coefficient(&grid_index))
        })
    }
}

/// The appendix chart: T² with λ = dy + u·dx, leaf direction X = ∂_x − u ∂_y
/// and transverse line L = ⟨∂_y⟩. Tangential forms are carried as g·dx with
/// g = ω(X).
#[derive(Debug, Clone)]
pub struct TorusFoliationChart {
    grid: GridRef,
    u: ScalarField,
}

impl TorusFoliationChart {
    pub fn new(u: ScalarField) -> Result<Self> {
        let grid = u.grid().clone();
        if grid.dim() != 2 {
            return Err(FolError::Invalid(
                "torus foliation chart needs a 2-grid (x, y)".to_string(),
            ));
        }
        let chart = TorusFoliationChart { grid, u };
        // λ(X) = u − u vanishes identically; evaluate it anyway so a broken
        // refactor of the conventions trips the invariant.
        let residual = chart.lambda_on_leaf_direction()?;
        if residual > 1e-12 {
            return Err(FolError::Invalid(format!(
                "leaf direction does not annihilate λ (residual {residual:.3e})"
            )));
        }
        Ok(chart)
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    /// λ = dy + u dx as an ambient one-form.
    pub fn lambda(&self) -> FullForm {
        FullForm::one_form(
            self.grid.clone(),
            vec![self.u.clone(), ScalarField::constant(self.grid.clone(), 1.0)],
        )
        .expect("valid one-form")
    }

    fn lambda_on_leaf_direction(&self) -> Result<f64> {
        let lam = self.lambda();
        let x_dir = vec![
            ScalarField::constant(self.grid.clone(), 1.0),
            self.u.scale(-1.0),
        ];
        Ok(lam.contract(&x_dir)?.coefficient(&[]).max_abs())
    }

    /// Derivative along the leaf direction: Xg = ∂_x g − u ∂_y g.
    pub fn leaf_derivative(&self, g: &ScalarField) -> Result<ScalarField> {
        let gx = g.spectral_partial_axis(0);
        let gy = g.spectral_partial_axis(1);
        gx.sub(&self.u.mul(&gy)?)
    }

    pub fn tangential_scalar(&self, g: ScalarField) -> TangentialForm {
        TangentialForm::scalar(g, self.leaf_axes())
    }

    pub fn tangential_one_form(&self, g: ScalarField) -> Result<TangentialForm> {
        TangentialForm::one_form(self.grid.clone(), self.leaf_axes(), vec![g])
    }
}

impl FoliationChart for TorusFoliationChart {
    fn grid(&self) -> &GridRef {
        &self.grid
    }

    fn leaf_axes(&self) -> Vec<usize> {
        vec![0]
    }

    fn tangential_d(&self, omega: &TangentialForm) -> Result<TangentialForm> {
        match omega.degree() {
            0 => {
                let g = omega.coefficient(&[]);
                self.tangential_one_form(self.leaf_derivative(&g)?)
            }
            // One-dimensional leaves: Ω²(F) = 0.
            d => Ok(TangentialForm::zero(
                self.grid.clone(),
                self.leaf_axes(),
                d + 1,
            )),
        }
    }

    fn mu(&self) -> Result<TangentialForm> {
        self.tangential_one_form(self.u.spectral_partial_axis(1).scale(-1.0))
    }

    fn lift(&self, omega: &TangentialForm) -> Result<FullForm> {
        if omega.degree() != 1 {
            return Err(FolError::UnsupportedDegree {
                op: "lift_L",
                degree: omega.degree(),
            });
        }
        // ω̄ = g dx: vanishes on L = ∂_y and agrees with ω on X.
        let g = omega.coefficient(&[0]);
        FullForm::one_form(
            self.grid.clone(),
            vec![g, ScalarField::zeros(self.grid.clone())],
        )
    }

    fn project(&self, sigma: &FullForm) -> Result<TangentialForm> {
        match sigma.degree() {
            0 => Ok(self.tangential_scalar(sigma.coefficient(&[]))),
            1 => {
                let sx = sigma.coefficient(&[0]);
                let sy = sigma.coefficient(&[1]);
                self.tangential_one_form(sx.sub(&self.u.mul(&sy)?)?)
            }
            d => Ok(TangentialForm::zero(self.grid.clone(), self.leaf_axes(), d)),
        }
    }
}

/// Max-abs defect of the gauge chain-map identity: d′(e^h ω) − e^h d(ω),
/// where d twists by μ and d′ twists by μ + d_F h.
pub fn gauge_chain_residual(
    chart: &dyn FoliationChart,
    omega: &TangentialForm,
    h: &ScalarField,
) -> Result<f64> {
    let eh = h.map(f64::exp);
    let mu = chart.mu()?;
    let dh = chart.tangential_d(&TangentialForm::scalar(h.clone(), chart.leaf_axes()))?;
    let mu_shifted = mu.add(&dh)?;
    let lhs = chart.twisted_d_with(&omega.mul_scalar(&eh)?, &mu_shifted)?;
    let rhs = chart.twisted_d(omega)?.mul_scalar(&eh)?;
    Ok(crate::forms::tangential_diff(&lhs, &rhs))
}
