//! Residual evaluators for the contact master equations of nonsingular
//! Legendrian foliations, in both coordinate and invariant form, together
//! with a multilinear oracle that contracts α ∧ dα against the graph tangent
//! frame directly (no use of the derived equations), the linearized residual,
//! the foliation ↔ section dictionary, and the second-order obstruction
//! certificate of the T³ example.

use crate::error::{FolError, Result};
use crate::field::ScalarField;
use crate::foliation::{FoliationChart, LegendrianChart};
use crate::forms::{multi_indices, FullForm, TangentialForm};

/// A candidate coisotropic deformation: the graph of p_i = s_i(x, q).
#[derive(Debug, Clone)]
pub struct Section {
    chart: LegendrianChart,
    s: Vec<ScalarField>,
}

impl Section {
    pub fn new(chart: LegendrianChart, s: Vec<ScalarField>) -> Result<Self> {
        if s.len() != chart.leaf_dim() {
            return Err(FolError::Invalid(format!(
                "expected {} section components, got {}",
                chart.leaf_dim(),
                s.len()
            )));
        }
        for si in &s {
            if !si.grid().same_as(chart.grid()) {
                return Err(FolError::GridMismatch(
                    "section components must live on the chart grid".to_string(),
                ));
            }
        }
        let section = Section { chart, s };
        let sup = section.sup_norm();
        let bound = section.chart.neighborhood_bound();
        if sup > bound {
            return Err(FolError::OutsideNeighborhood { sup, bound });
        }
        Ok(section)
    }

    pub fn zero(chart: LegendrianChart) -> Self {
        let s = (0..chart.leaf_dim())
            .map(|_| ScalarField::zeros(chart.grid().clone()))
            .collect();
        Section { chart, s }
    }

    pub fn chart(&self) -> &LegendrianChart {
        &self.chart
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.s
    }

    /// Pointwise Euclidean sup-norm of the section.
    pub fn sup_norm(&self) -> f64 {
        let len = self.chart.grid().len();
        let mut sup = 0.0f64;
        for idx in 0..len {
            let norm2: f64 = self.s.iter().map(|si| si.values()[idx].powi(2)).sum();
            sup = sup.max(norm2);
        }
        sup.sqrt()
    }

    /// The section as a tangential one-form s = s_i dqⁱ.
    pub fn as_tangential(&self) -> TangentialForm {
        self.chart
            .tangential_one_form(self.s.clone())
            .expect("validated at construction")
    }
}

/// Per-pair and per-triple master-equation defects.
#[derive(Debug, Clone)]
pub struct MasterResidual {
    /// Defect of the pair equation, one field per a < b.
    pub res1: Vec<((usize, usize), ScalarField)>,
    /// Defect of the triple equation, one field per a < b < c.
    pub res2: Vec<((usize, usize, usize), ScalarField)>,
}

impl MasterResidual {
    pub fn res1_max(&self) -> f64 {
        self.res1.iter().fold(0.0, |m, (_, f)| m.max(f.max_abs()))
    }

    pub fn res2_max(&self) -> f64 {
        self.res2.iter().fold(0.0, |m, (_, f)| m.max(f.max_abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.res1_max().max(self.res2_max())
    }
}

/// Spectral derivatives of the chart and section data that every residual
/// evaluator consumes.
struct Jet {
    f: ScalarField,
    f_q: Vec<ScalarField>,
    r: Vec<ScalarField>,
    r_q: Vec<Vec<ScalarField>>, // r_q[k][j] = ∂R^k/∂q^j
    s: Vec<ScalarField>,
    s_x: Vec<ScalarField>,
    s_q: Vec<Vec<ScalarField>>, // s_q[i][j] = ∂s_i/∂q^j
    rs: ScalarField,            // s_k R^k
    rs_q: Vec<ScalarField>,     // ∂(s_k R^k)/∂q^j
}

fn jet(section: &Section) -> Result<Jet> {
    let chart = section.chart();
    let n = chart.leaf_dim();
    let f = chart.f().clone();
    let f_q: Vec<_> = (0..n).map(|j| f.spectral_partial_axis(j + 1)).collect();
    let r = chart.r().to_vec();
    let r_q: Vec<Vec<_>> = r
        .iter()
        .map(|rk| (0..n).map(|j| rk.spectral_partial_axis(j + 1)).collect())
        .collect();
    let s = section.components().to_vec();
    let s_x: Vec<_> = s.iter().map(|si| si.spectral_partial_axis(0)).collect();
    let s_q: Vec<Vec<_>> = s
        .iter()
        .map(|si| (0..n).map(|j| si.spectral_partial_axis(j + 1)).collect())
        .collect();
    let mut rs = ScalarField::zeros(chart.grid().clone());
    for k in 0..n {
        rs = rs.add(&s[k].mul(&r[k])?)?;
    }
    let rs_q: Vec<_> = (0..n).map(|j| rs.spectral_partial_axis(j + 1)).collect();
    Ok(Jet {
        f,
        f_q,
        r,
        r_q,
        s,
        s_x,
        s_q,
        rs,
        rs_q,
    })
}

/// Coordinate-form master residual. The pair defect is the printed equation
/// with ∂f/∂qᵇ in the slot where the source text has the dimensionally
/// impossible ∂f/∂p_b; the correction is pinned by `coisotropy_oracle`.
pub fn master_residual_coord(section: &Section) -> Result<MasterResidual> {
    let n = section.chart().leaf_dim();
    let j = jet(section)?;
    let mut res1 = Vec::new();
    for pair in multi_indices(n, 2) {
        let (a, b) = (pair[0], pair[1]);
        // LHS: f(∂s_a/∂q^b − ∂s_b/∂q^a) − s_a ∂f/∂q^b + s_b ∂f/∂q^a.
        let lhs = j
            .f
            .mul(&j.s_q[a][b].sub(&j.s_q[b][a])?)?
            .sub(&j.s[a].mul(&j.f_q[b])?)?
            .add(&j.s[b].mul(&j.f_q[a])?)?;
        // RHS: s_a ∂(s_kR^k)/∂q^b − s_kR^k ∂s_a/∂q^b + s_a ∂s_b/∂x
        //      − (s_b ∂(s_kR^k)/∂q^a − s_kR^k ∂s_b/∂q^a + s_b ∂s_a/∂x).
        let rhs = j
            .s[a]
            .mul(&j.rs_q[b])?
            .sub(&j.rs.mul(&j.s_q[a][b])?)?
            .add(&j.s[a].mul(&j.s_x[b])?)?
            .sub(&j.s[b].mul(&j.rs_q[a])?)?
            .add(&j.rs.mul(&j.s_q[b][a])?)?
            .sub(&j.s[b].mul(&j.s_x[a])?)?;
        res1.push(((a, b), lhs.sub(&rhs)?));
    }
    let mut res2 = Vec::new();
    for triple in multi_indices(n, 3) {
        let (a, b, c) = (triple[0], triple[1], triple[2]);
        let field = j.s[a]
            .mul(&j.s_q[c][b])?
            .sub(&j.s[a].mul(&j.s_q[b][c])?)?
            .add(&j.s[b].mul(&j.s_q[a][c])?)?
            .sub(&j.s[b].mul(&j.s_q[c][a])?)?
            .add(&j.s[c].mul(&j.s_q[b][a])?)?
            .sub(&j.s[c].mul(&j.s_q[a][b])?)?;
        res2.push(((a, b, c), field));
    }
    Ok(MasterResidual { res1, res2 })
}

/// Direct multilinear evaluation of α ∧ dα on the graph tangent frame at
/// every grid point, independent of the derived master equations. Returns
/// the same per-pair/per-triple layout so sign errors are localized.
pub fn coisotropy_oracle(section: &Section) -> Result<MasterResidual> {
    let chart = section.chart();
    let n = chart.leaf_dim();
    let grid = chart.grid().clone();
    let j = jet(section)?;
    let len = grid.len();
    let dim = 2 * n + 1; // thickened chart basis: ∂x, ∂q, ∂p

    let pairs = multi_indices(n, 2);
    let triples = multi_indices(n, 3);
    let mut out1: Vec<Vec<f64>> = vec![vec![0.0; len]; pairs.len()];
    let mut out2: Vec<Vec<f64>> = vec![vec![0.0; len]; triples.len()];

    let mut alpha = vec![0.0f64; dim];
    let mut dalpha = vec![0.0f64; dim * dim];
    let mut frame = vec![vec![0.0f64; dim]; n + 1];

    for idx in 0..len {
        // α = (f + R^k s_k) dx − s_i dqⁱ on the graph p = s.
        alpha.iter_mut().for_each(|v| *v = 0.0);
        alpha[0] = j.f.values()[idx] + j.rs.values()[idx];
        for i in 0..n {
            alpha[1 + i] = -j.s[i].values()[idx];
        }
        // dα = (∂f/∂qʲ + p_k ∂Rᵏ/∂qʲ) dqʲ∧dx + Rⁱ dp_i∧dx − dp_i∧dqⁱ,
        // evaluated at p = s.
        dalpha.iter_mut().for_each(|v| *v = 0.0);
        for jq in 0..n {
            let mut c = j.f_q[jq].values()[idx];
            for k in 0..n {
                c += j.s[k].values()[idx] * j.r_q[k][jq].values()[idx];
            }
            dalpha[(1 + jq) * dim] = c;
            dalpha[1 + jq] = -c;
        }
        for i in 0..n {
            let r = j.r[i].values()[idx];
            dalpha[(1 + n + i) * dim] = r;
            dalpha[1 + n + i] = -r;
            dalpha[(1 + n + i) * dim + (1 + i)] = -1.0;
            dalpha[(1 + i) * dim + (1 + n + i)] = 1.0;
        }
        // Graph tangent frame v₀ = ∂x + ∂s_i/∂x ∂p_i, v_a = ∂q^a + ∂s_i/∂q^a ∂p_i.
        for v in frame.iter_mut() {
            v.iter_mut().for_each(|c| *c = 0.0);
        }
        frame[0][0] = 1.0;
        for i in 0..n {
            frame[0][1 + n + i] = j.s_x[i].values()[idx];
        }
        for a in 0..n {
            frame[1 + a][1 + a] = 1.0;
            for i in 0..n {
                frame[1 + a][1 + n + i] = j.s_q[i][a].values()[idx];
            }
        }

        let pair_da = |u: &[f64], v: &[f64]| -> f64 {
            let mut acc = 0.0;
            for (r, &ur) in u.iter().enumerate() {
                if ur == 0.0 {
                    continue;
                }
                for (c, &vc) in v.iter().enumerate() {
                    acc += ur * dalpha[r * dim + c] * vc;
                }
            }
            acc
        };
        let eval3 = |u: &[f64], v: &[f64], w: &[f64]| -> f64 {
            let au: f64 = alpha.iter().zip(u).map(|(a, b)| a * b).sum();
            let av: f64 = alpha.iter().zip(v).map(|(a, b)| a * b).sum();
            let aw: f64 = alpha.iter().zip(w).map(|(a, b)| a * b).sum();
            au * pair_da(v, w) - av * pair_da(u, w) + aw * pair_da(u, v)
        };

        for (slot, pair) in pairs.iter().enumerate() {
            out1[slot][idx] = eval3(&frame[0], &frame[1 + pair[0]], &frame[1 + pair[1]]);
        }
        for (slot, triple) in triples.iter().enumerate() {
            out2[slot][idx] = eval3(
                &frame[1 + triple[0]],
                &frame[1 + triple[1]],
                &frame[1 + triple[2]],
            );
        }
    }

    let res1 = pairs
        .iter()
        .zip(out1)
        .map(|(p, vals)| Ok(((p[0], p[1]), ScalarField::new(grid.clone(), vals)?)))
        .collect::<Result<Vec<_>>>()?;
    let res2 = triples
        .iter()
        .zip(out2)
        .map(|(t, vals)| Ok(((t[0], t[1], t[2]), ScalarField::new(grid.clone(), vals)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MasterResidual { res1, res2 })
}

/// Invariant-form master residual: (s̄∧ds̄ − s̄∧dλ − ds̄∧λ, s∧d_F s). The first
/// vanishes with the pair equation, the second with the triple equation.
pub fn master_residual_invariant(section: &Section) -> Result<(FullForm, TangentialForm)> {
    let chart = section.chart();
    let s = section.as_tangential();
    let s_bar = chart.lift(&s)?;
    let lambda = chart.lambda();
    let ds_bar = s_bar.exterior_d()?;
    let dlambda = lambda.exterior_d()?;
    let supfol = s_bar
        .wedge(&ds_bar)?
        .sub(&s_bar.wedge(&dlambda)?)?
        .sub(&ds_bar.wedge(&lambda)?)?;
    let subfol = s.wedge(&chart.tangential_d(&s)?)?;
    Ok((supfol, subfol))
}

/// d_F^λ ζ; ζ is an infinitesimal deformation iff this vanishes.
pub fn infinitesimal_residual(
    chart: &LegendrianChart,
    zeta: &TangentialForm,
) -> Result<TangentialForm> {
    chart.twisted_d(zeta)
}

/// The deformed defining form λ′ = s̄ − λ and its Frobenius residual
/// max |λ′ ∧ dλ′|.
pub fn deformed_form(section: &Section) -> Result<(FullForm, f64)> {
    let chart = section.chart();
    let s_bar = chart.lift(&section.as_tangential())?;
    let lambda_prime = s_bar.sub(&chart.lambda())?;
    let frob = lambda_prime.wedge(&lambda_prime.exterior_d()?)?.max_abs();
    Ok((lambda_prime, frob))
}

/// Inverse dictionary: rescale m so that λ(L) = −m(L) and return
/// s = π(λ + m). Round-trips with `deformed_form` up to the sign convention
/// λ′ = s̄ − λ.
pub fn foliation_to_section(chart: &LegendrianChart, m: &FullForm) -> Result<Section> {
    if m.degree() != 1 {
        return Err(FolError::UnsupportedDegree {
            op: "foliation_to_section",
            degree: m.degree(),
        });
    }
    let grid = chart.grid().clone();
    // m(L) = m_x + Rⁱ m_i must not vanish.
    let mut m_of_l = m.coefficient(&[0]);
    for (i, r) in chart.r().iter().enumerate() {
        m_of_l = m_of_l.add(&r.mul(&m.coefficient(&[1 + i]))?)?;
    }
    let min_abs = m_of_l
        .values()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if min_abs <= 1e-12 * m_of_l.max_abs().max(1.0) {
        return Err(FolError::NotTransverse(min_abs));
    }
    // Rescale: λ(L) = f, so the factor is −f / m(L).
    let factor = chart.f().scale(-1.0).div(&m_of_l)?;
    let scaled: Vec<ScalarField> = (0..grid.dim())
        .map(|axis| m.coefficient(&[axis]).mul(&factor))
        .collect::<Result<Vec<_>>>()?;
    let m_scaled = FullForm::one_form(grid, scaled)?;
    let total = chart.lambda().add(&m_scaled)?;
    let s = chart.project(&total)?;
    Section::new(chart.clone(), (0..chart.leaf_dim()).map(|i| s.coefficient(&[i])).collect())
}

/// Second-order obstruction on a flat T³-style chart (λ = dx-transverse,
/// two leaf axes): returns ω = ζ ∧ ∂ζ/∂x and its leafwise mean. A nonzero
/// certificate obstructs ζ at second order, because the leafwise mean of any
/// d_F-exact two-form vanishes.
pub fn second_order_obstruction(
    chart: &LegendrianChart,
    zeta: &TangentialForm,
    tol: f64,
) -> Result<(TangentialForm, ScalarField)> {
    if chart.leaf_dim() != 2 {
        return Err(FolError::Invalid(
            "second_order_obstruction expects a chart with two leaf axes".to_string(),
        ));
    }
    let cocycle_defect = infinitesimal_residual(chart, zeta)?.max_abs();
    if cocycle_defect > tol {
        return Err(FolError::NotACocycle(cocycle_defect));
    }
    let dzeta_dx = zeta.map_components(|_, f| Ok(f.spectral_partial_axis(0)))?;
    let omega = zeta.wedge(&dzeta_dx)?;
    let leaf_mask: Vec<bool> = (0..chart.grid().dim()).map(|a| a != 0).collect();
    let certificate = omega.coefficient(&[0, 1]).leafwise_mean_mask(&leaf_mask);
    Ok((omega, certificate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::max_abs_diff;
    use crate::grid::PeriodicGrid;
    use crate::sampling::{random_positive_field, random_trig_field, rng};

    fn chart_n(n: usize, res: usize, seed: u64, with_r: bool) -> LegendrianChart {
        let axes: Vec<String> = std::iter::once("x".to_string())
            .chain((1..=n).map(|i| format!("q{i}")))
            .collect();
        let axes_ref: Vec<&str> = axes.iter().map(|s| s.as_str()).collect();
        let g = PeriodicGrid::uniform(&axes_ref, res).unwrap();
        let mut r = rng(seed);
        let f = random_positive_field(&g, &mut r, 0.3);
        let rs = (0..n)
            .map(|_| {
                if with_r {
                    random_trig_field(&g, &mut r, 0.5)
                } else {
                    ScalarField::zeros(g.clone())
                }
            })
            .collect();
        LegendrianChart::new(f, rs).unwrap()
    }

    fn small_section(chart: &LegendrianChart, seed: u64, scale: f64) -> Section {
        let mut r = rng(seed);
        let s = (0..chart.leaf_dim())
            .map(|_| random_trig_field(chart.grid(), &mut r, scale))
            .collect();
        Section::new(chart.clone(), s).unwrap()
    }

    #[test]
    fn zero_section_has_zero_residuals() {
        for n in [2usize, 3] {
            let chart = chart_n(n, 16, 1, true);
            let s = Section::zero(chart);
            let res = master_residual_coord(&s).unwrap();
            assert_eq!(res.max_abs(), 0.0);
            let oracle = coisotropy_oracle(&s).unwrap();
            assert!(oracle.max_abs() <= 1e-12);
        }
    }

    #[test]
    fn coord_residual_matches_oracle_pointwise() {
        for (n, res, seed) in [(2usize, 32, 10u64), (3, 16, 11)] {
            let chart = chart_n(n, res, seed, true);
            let s = small_section(&chart, seed + 100, 0.05);
            let coord = master_residual_coord(&s).unwrap();
            let oracle = coisotropy_oracle(&s).unwrap();
            for ((pa, fa), (pb, fb)) in coord.res1.iter().zip(&oracle.res1) {
                assert_eq!(pa, pb);
                assert!(
                    max_abs_diff(fa, fb) <= 1e-9,
                    "n={n} pair {pa:?}: {}",
                    max_abs_diff(fa, fb)
                );
            }
            for ((ta, fa), (tb, fb)) in coord.res2.iter().zip(&oracle.res2) {
                assert_eq!(ta, tb);
                assert!(max_abs_diff(fa, fb) <= 1e-9);
            }
        }
    }

    #[test]
    fn corrupted_pair_equation_is_detected() {
        // Flip the sign of the s_b ∂f/∂q^a term in the pair equation; the
        // oracle must disagree at the 1e-2 level on generic data.
        let g = PeriodicGrid::new(&["x", "q1", "q2"], &[16, 16, 16]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| 1.0 + 0.45 * (c[1].sin() + 0.5 * (c[2] + c[0]).cos()));
        let mut r = rng(21);
        let chart = LegendrianChart::new(
            f,
            vec![
                random_trig_field(&g, &mut r, 0.5),
                random_trig_field(&g, &mut r, 0.5),
            ],
        )
        .unwrap();
        let s = small_section(&chart, 22, 0.09);
        let j_f = chart.f().clone();
        let f_q: Vec<_> = (0..2).map(|q| j_f.spectral_partial_axis(q + 1)).collect();
        let (a, b) = (0usize, 1usize);
        let sa = &s.components()[a];
        let sb = &s.components()[b];
        let sa_qb = sa.spectral_partial_axis(1 + b);
        let sb_qa = sb.spectral_partial_axis(1 + a);
        let corrupted_lhs = j_f
            .mul(&sa_qb.sub(&sb_qa).unwrap())
            .unwrap()
            .sub(&sa.mul(&f_q[b]).unwrap())
            .unwrap()
            // Sign flip relative to the true equation.
            .sub(&sb.mul(&f_q[a]).unwrap())
            .unwrap();
        let truth = master_residual_coord(&s).unwrap();
        let true_lhs_part = &truth.res1[0].1;
        // Reconstruct the corrupted residual: corrupted_lhs − RHS
        //   = true residual − 2 s_b ∂f/∂q^a.
        let corrupted = true_lhs_part
            .sub(&sb.mul(&f_q[a]).unwrap().scale(2.0))
            .unwrap();
        let oracle = &coisotropy_oracle(&s).unwrap().res1[0].1;
        let disagreement = max_abs_diff(&corrupted, oracle);
        assert!(
            disagreement >= 1e-2,
            "sign flip must be detected, got {disagreement}"
        );
        let _ = corrupted_lhs;
    }

    #[test]
    fn invariant_form_matches_coordinates() {
        let chart = chart_n(3, 16, 30, true);
        let s = small_section(&chart, 31, 0.04);
        let coord = master_residual_coord(&s).unwrap();
        let (supfol, subfol) = master_residual_invariant(&s).unwrap();
        // dx∧dq^a∧dq^b component of the supfol defect equals res1(a,b).
        for ((a, b), field) in &coord.res1 {
            let comp = supfol.coefficient(&[0, 1 + a, 1 + b]);
            assert!(
                max_abs_diff(&comp, field) <= 1e-9,
                "pair ({a},{b}): {}",
                max_abs_diff(&comp, field)
            );
        }
        // dq^a∧dq^b∧dq^c component of s∧d_F s equals res2(a,b,c): the
        // antisymmetrization of s_i s_{k,qʲ} reproduces the triple equation.
        for ((a, b, c), field) in &coord.res2 {
            let comp = subfol.coefficient(&[*a, *b, *c]);
            assert!(max_abs_diff(&comp, field) <= 1e-9);
        }
        // The pure-q components of the supfol defect agree with s∧d_F s.
        for ((a, b, c), _) in &coord.res2 {
            let comp = supfol.coefficient(&[1 + a, 1 + b, 1 + c]);
            let tang = subfol.coefficient(&[*a, *b, *c]);
            assert!(max_abs_diff(&comp, &tang) <= 1e-9);
        }
    }

    #[test]
    fn constant_parallel_section_kills_subfol() {
        // s = c·dq¹ constant: s ∧ d_F s = 0.
        let chart = chart_n(3, 16, 40, false);
        let mut comps = vec![ScalarField::constant(chart.grid().clone(), 0.03)];
        comps.push(ScalarField::zeros(chart.grid().clone()));
        comps.push(ScalarField::zeros(chart.grid().clone()));
        let s = Section::new(chart, comps).unwrap();
        let (_, subfol) = master_residual_invariant(&s).unwrap();
        assert!(subfol.max_abs() <= 1e-14);
    }

    #[test]
    fn linearization_slope_is_two() {
        // Twisted cocycles ζ = d^λ g: residual of εζ is O(ε²).
        let chart = chart_n(2, 32, 50, false);
        let g = random_trig_field(chart.grid(), &mut rng(51), 1.0);
        let zeta = chart
            .twisted_d(&TangentialForm::scalar(g, crate::foliation::FoliationChart::leaf_axes(&chart)))
            .unwrap();
        let norm = zeta.max_abs();
        let eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
        let mut pts = Vec::new();
        for &e in &eps {
            let scale = e / norm;
            let comps: Vec<_> = (0..2).map(|i| zeta.coefficient(&[i]).scale(scale)).collect();
            let s = Section::new(chart.clone(), comps).unwrap();
            let r = master_residual_coord(&s).unwrap().max_abs();
            pts.push((e.ln(), r.ln()));
        }
        let slope = fit_slope(&pts);
        assert!((slope - 2.0).abs() <= 0.1, "slope = {slope}");
    }

    pub(crate) fn fit_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn deformed_form_of_zero_section() {
        let chart = chart_n(2, 16, 60, true);
        let s = Section::zero(chart.clone());
        let (lp, frob) = deformed_form(&s).unwrap();
        // λ′ = −λ and λ defines a foliation.
        assert!(
            crate::forms::full_form_diff(&lp, &chart.lambda().scale(-1.0)) <= 1e-14
        );
        assert!(frob <= 1e-10);
    }

    #[test]
    fn frobenius_residual_tracks_master_residual() {
        let chart = chart_n(2, 32, 61, true);
        let s = small_section(&chart, 62, 0.05);
        let (_, frob) = deformed_form(&s).unwrap();
        let master = master_residual_coord(&s).unwrap().max_abs();
        // Both vanish together; on generic data both are comfortably nonzero
        // and within a fixed basis constant of each other.
        assert!(frob > 1e-6 && master > 1e-6);
        let ratio = frob / master;
        assert!(ratio > 1e-2 && ratio < 1e2, "ratio = {ratio}");
    }

    #[test]
    fn foliation_section_round_trip() {
        let chart = chart_n(2, 16, 70, true);
        // m = −λ gives s = 0.
        let m = chart.lambda().scale(-1.0);
        let s0 = foliation_to_section(&chart, &m).unwrap();
        assert!(s0.sup_norm() <= 1e-14);

        // Round trip through deformed_form.
        let s = small_section(&chart, 71, 0.05);
        let (lp, _) = deformed_form(&s).unwrap();
        let back = foliation_to_section(&chart, &lp).unwrap();
        for (a, b) in back.components().iter().zip(s.components()) {
            assert!(max_abs_diff(a, b) <= 1e-10);
        }

        // R ≡ 0 chart: m = −λ + c dq¹ recovers s = c dq¹ exactly.
        let chart0 = chart_n(2, 16, 72, false);
        let g = chart0.grid().clone();
        let c = 0.04;
        let m = FullForm::one_form(
            g.clone(),
            vec![
                chart0.f().scale(-1.0),
                ScalarField::constant(g.clone(), c),
                ScalarField::zeros(g),
            ],
        )
        .unwrap();
        let rec = foliation_to_section(&chart0, &m).unwrap();
        assert!((rec.components()[0].mean() - c).abs() <= 1e-14);
        assert!(rec.components()[0].max_abs() - c <= 1e-14);
        assert!(rec.components()[1].max_abs() <= 1e-14);
    }

    #[test]
    fn t3_example_is_infinitesimal_but_obstructed() {
        // T³ with λ = dz: transverse axis x := z, leaf axes q¹ := x, q² := y.
        let g = PeriodicGrid::new(&["x", "q1", "q2"], &[32, 16, 16]).unwrap();
        let chart = LegendrianChart::flat(g.clone()).unwrap();
        let zeta = chart
            .tangential_one_form(vec![
                ScalarField::from_fn(g.clone(), |c| c[0].cos()),
                ScalarField::from_fn(g.clone(), |c| c[0].sin()),
            ])
            .unwrap();
        let infi = infinitesimal_residual(&chart, &zeta).unwrap();
        assert!(infi.max_abs() <= 1e-12);

        let (omega, cert) = second_order_obstruction(&chart, &zeta, 1e-10).unwrap();
        // ω = dx∧dy with coefficient 1; certificate ≡ 1.
        let one = ScalarField::constant(g.clone(), 1.0);
        assert!(max_abs_diff(&omega.coefficient(&[0, 1]), &one) <= 1e-12);
        assert!(max_abs_diff(&cert, &one) <= 1e-12);

        // z-independent ζ = dq¹ has ω = 0.
        let flat = chart
            .tangential_one_form(vec![
                ScalarField::constant(g.clone(), 1.0),
                ScalarField::zeros(g.clone()),
            ])
            .unwrap();
        let (omega, cert) = second_order_obstruction(&chart, &flat, 1e-10).unwrap();
        assert!(omega.max_abs() <= 1e-14);
        assert!(cert.max_abs() <= 1e-14);

        // ζ = g(z) dq¹ wedges to zero against its z-derivative.
        let gz = chart
            .tangential_one_form(vec![
                ScalarField::from_fn(g.clone(), |c| (2.0 * c[0]).cos()),
                ScalarField::zeros(g.clone()),
            ])
            .unwrap();
        let (omega, _) = second_order_obstruction(&chart, &gz, 1e-10).unwrap();
        assert!(omega.max_abs() <= 1e-12);

        // A non-cocycle is rejected: sin(q¹) dq² has d_F ζ = cos(q¹) dq¹∧dq².
        let bad = chart
            .tangential_one_form(vec![
                ScalarField::zeros(g.clone()),
                ScalarField::from_fn(g, |c| c[1].sin()),
            ])
            .unwrap();
        assert!(matches!(
            second_order_obstruction(&chart, &bad, 1e-10),
            Err(FolError::NotACocycle(_))
        ));
    }

    #[test]
    fn section_outside_neighborhood_rejected() {
        let chart = chart_n(2, 16, 80, false);
        let big = ScalarField::constant(chart.grid().clone(), 10.0);
        let z = ScalarField::zeros(chart.grid().clone());
        assert!(matches!(
            Section::new(chart, vec![big, z]),
            Err(FolError::OutsideNeighborhood { .. })
        ));
    }

    #[test]
    fn infinitesimal_two_path_evaluation() {
        // ζ = sin(q¹) dq² on an f = 1 + 0.3 sin q¹ chart: d^λζ nonzero and
        // equal to d_Fζ − μ∧ζ assembled by hand.
        let g = PeriodicGrid::new(&["x", "q1", "q2"], &[16, 16, 16]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| 1.0 + 0.3 * c[1].sin());
        let chart = LegendrianChart::new(
            f.clone(),
            vec![ScalarField::zeros(g.clone()), ScalarField::zeros(g.clone())],
        )
        .unwrap();
        let zeta = chart
            .tangential_one_form(vec![
                ScalarField::zeros(g.clone()),
                ScalarField::from_fn(g.clone(), |c| c[1].sin()),
            ])
            .unwrap();
        let lhs = infinitesimal_residual(&chart, &zeta).unwrap();
        assert!(lhs.max_abs() > 1e-3);
        let d = chart.tangential_d(&zeta).unwrap();
        let mu = crate::foliation::FoliationChart::mu(&chart).unwrap();
        let rhs = d.sub(&mu.wedge(&zeta).unwrap()).unwrap();
        assert!(crate::forms::tangential_diff(&lhs, &rhs) <= 1e-12);
    }
}
