//! Graded differential forms with ScalarField coefficients.
//!
//! Components are stored over strictly increasing multi-indices in
//! lexicographic order; all sign bookkeeping lives in the merge/contraction
//! routines here, so chart code never tracks orientation by hand.

use crate::error::{FolError, Result};
use crate::field::ScalarField;
use crate::grid::GridRef;

#[derive(Debug, Clone)]
pub struct FormComponent {
    /// Strictly increasing axis positions (into the grid for full forms,
    /// into the leaf-axis list for tangential forms).
    pub index: Vec<usize>,
    pub field: ScalarField,
}

/// All strictly increasing k-subsets of 0..n in lexicographic order.
pub fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        // Next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - (k - i) {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Merge two disjoint increasing multi-indices; returns the merged index and
/// the sign of the sorting permutation, or None when they intersect.
pub fn merge_sign(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut merged = Vec::with_capacity(a.len() + b.len());
    let mut sign = 1.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            merged.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            // Element of b jumps over the remaining elements of a.
            if (a.len() - i) % 2 == 1 {
                sign = -sign;
            }
            merged.push(b[j]);
            j += 1;
        } else {
            return None;
        }
    }
    Some((merged, sign))
}

/// Sign of removing the element at `pos` from an increasing index (the parity
/// of moving it to the front).
pub fn removal_sign(pos: usize) -> f64 {
    if pos % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A graded form over all axes of a grid.
#[derive(Debug, Clone)]
pub struct FullForm {
    grid: GridRef,
    degree: usize,
    components: Vec<FormComponent>,
}

/// A form along a fixed list of leaf directions of a foliated chart. The
/// geometric meaning of the leaf directions (coordinate plaques or a twisted
/// frame) is the chart's business; this type only does graded algebra.
#[derive(Debug, Clone)]
pub struct TangentialForm {
    grid: GridRef,
    leaf_axes: Vec<usize>,
    degree: usize,
    components: Vec<FormComponent>,
}

fn build_components(
    grid: &GridRef,
    n: usize,
    degree: usize,
    mut get: impl FnMut(&[usize]) -> Option<ScalarField>,
) -> Vec<FormComponent> {
    multi_indices(n, degree)
        .into_iter()
        .map(|index| {
            let field = get(&index).unwrap_or_else(|| ScalarField::zeros(grid.clone()));
            FormComponent { index, field }
        })
        .collect()
}

impl FullForm {
    pub fn zero(grid: GridRef, degree: usize) -> Self {
        let comps = build_components(&grid, grid.dim(), degree, |_| None);
        FullForm {
            grid,
            degree,
            components: comps,
        }
    }

    /// Degree-0 form from a scalar.
    pub fn scalar(field: ScalarField) -> Self {
        let grid = field.grid().clone();
        FullForm {
            grid,
            degree: 0,
            components: vec![FormComponent {
                index: Vec::new(),
                field,
            }],
        }
    }

    /// Degree-1 form from per-axis coefficients.
    pub fn one_form(grid: GridRef, coefficients: Vec<ScalarField>) -> Result<Self> {
        if coefficients.len() != grid.dim() {
            return Err(FolError::Invalid(
                "one_form needs one coefficient per axis".to_string(),
            ));
        }
        let components = coefficients
            .into_iter()
            .enumerate()
            .map(|(i, field)| FormComponent {
                index: vec![i],
                field,
            })
            .collect();
        Ok(FullForm {
            grid,
            degree: 1,
            components,
        })
    }

    pub fn from_components(
        grid: GridRef,
        degree: usize,
        components: Vec<FormComponent>,
    ) -> Result<Self> {
        let expected = multi_indices(grid.dim(), degree);
        if components.len() != expected.len()
            || components
                .iter()
                .zip(&expected)
                .any(|(c, e)| &c.index != e)
        {
            return Err(FolError::Invalid(
                "components must list every increasing multi-index in lex order".to_string(),
            ));
        }
        Ok(FullForm {
            grid,
            degree,
            components,
        })
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[FormComponent] {
        &self.components
    }

    pub fn component(&self, index: &[usize]) -> Option<&ScalarField> {
        self.components
            .iter()
            .find(|c| c.index == index)
            .map(|c| &c.field)
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0, |m, c| m.max(c.field.max_abs()))
    }

    pub fn add(&self, other: &FullForm) -> Result<FullForm> {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &FullForm) -> Result<FullForm> {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: f64) -> FullForm {
        FullForm {
            grid: self.grid.clone(),
            degree: self.degree,
            components: self
                .components
                .iter()
                .map(|comp| FormComponent {
                    index: comp.index.clone(),
                    field: comp.field.scale(c),
                })
                .collect(),
        }
    }

    fn zip(
        &self,
        other: &FullForm,
        f: impl Fn(&ScalarField, &ScalarField) -> Result<ScalarField>,
    ) -> Result<FullForm> {
        if self.degree != other.degree || !self.grid.same_as(&other.grid) {
            return Err(FolError::GridMismatch(
                "form degree/grid mismatch".to_string(),
            ));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| {
                Ok(FormComponent {
                    index: a.index.clone(),
                    field: f(&a.field, &b.field)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FullForm {
            grid: self.grid.clone(),
            degree: self.degree,
            components,
        })
    }

    /// Wedge product; degrees add.
    pub fn wedge(&self, other: &FullForm) -> Result<FullForm> {
        if !self.grid.same_as(&other.grid) {
            return Err(FolError::GridMismatch("wedge grid mismatch".to_string()));
        }
        let degree = self.degree + other.degree;
        let mut out = FullForm::zero(self.grid.clone(), degree);
        for a in &self.components {
            for b in &other.components {
                if let Some((merged, sign)) = merge_sign(&a.index, &b.index) {
                    let term = a.field.mul(&b.field)?.scale(sign);
                    let slot = out
                        .components
                        .iter_mut()
                        .find(|c| c.index == merged)
                        .expect("merged index in range");
                    slot.field = slot.field.add(&term)?;
                }
            }
        }
        Ok(out)
    }

    /// Spectral exterior derivative; d∘d = 0 to spectral accuracy.
    pub fn exterior_d(&self) -> Result<FullForm> {
        if self.degree >= self.grid.dim() {
            return Ok(FullForm::zero(self.grid.clone(), self.degree + 1));
        }
        if self.degree > 3 {
            return Err(FolError::UnsupportedDegree {
                op: "exterior_d",
                degree: self.degree,
            });
        }
        let mut out = FullForm::zero(self.grid.clone(), self.degree + 1);
        for comp in &self.components {
            for axis in 0..self.grid.dim() {
                if comp.index.contains(&axis) {
                    continue;
                }
                let pos = comp.index.iter().filter(|&&i| i < axis).count();
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                let mut index = comp.index.clone();
                index.insert(pos, axis);
                let term = comp.field.spectral_partial_axis(axis).scale(sign);
                let slot = out
                    .components
                    .iter_mut()
                    .find(|c| c.index == index)
                    .expect("inserted index in range");
                slot.field = slot.field.add(&term)?;
            }
        }
        Ok(out)
    }

    /// Interior product with a vector field given by per-axis components.
    pub fn contract(&self, vector: &[ScalarField]) -> Result<FullForm> {
        if vector.len() != self.grid.dim() {
            return Err(FolError::Invalid(
                "contract needs one vector component per axis".to_string(),
            ));
        }
        if self.degree == 0 {
            return Err(FolError::UnsupportedDegree {
                op: "contract",
                degree: 0,
            });
        }
        let mut out = FullForm::zero(self.grid.clone(), self.degree - 1);
        for comp in &self.components {
            for (pos, &axis) in comp.index.iter().enumerate() {
                let sign = removal_sign(pos);
                let mut index = comp.index.clone();
                index.remove(pos);
                let term = comp.field.mul(&vector[axis])?.scale(sign);
                let slot = out
                    .components
                    .iter_mut()
                    .find(|c| c.index == index)
                    .expect("reduced index in range");
                slot.field = slot.field.add(&term)?;
            }
        }
        Ok(out)
    }

    /// Evaluate on constant coordinate vectors at every node: ω(e_{i1},...,e_{ik})
    /// for an increasing index; this is just component lookup.
    pub fn coefficient(&self, index: &[usize]) -> ScalarField {
        self.component(index)
            .cloned()
            .unwrap_or_else(|| ScalarField::zeros(self.grid.clone()))
    }
}

impl TangentialForm {
    pub fn zero(grid: GridRef, leaf_axes: Vec<usize>, degree: usize) -> Self {
        let comps = build_components(&grid, leaf_axes.len(), degree, |_| None);
        TangentialForm {
            grid,
            leaf_axes,
            degree,
            components: comps,
        }
    }

    pub fn scalar(field: ScalarField, leaf_axes: Vec<usize>) -> Self {
        let grid = field.grid().clone();
        TangentialForm {
            grid,
            leaf_axes,
            degree: 0,
            components: vec![FormComponent {
                index: Vec::new(),
                field,
            }],
        }
    }

    /// Degree-1 tangential form from one coefficient per leaf direction.
    pub fn one_form(
        grid: GridRef,
        leaf_axes: Vec<usize>,
        coefficients: Vec<ScalarField>,
    ) -> Result<Self> {
        if coefficients.len() != leaf_axes.len() {
            return Err(FolError::Invalid(
                "one coefficient per leaf direction required".to_string(),
            ));
        }
        let components = coefficients
            .into_iter()
            .enumerate()
            .map(|(i, field)| FormComponent {
                index: vec![i],
                field,
            })
            .collect();
        Ok(TangentialForm {
            grid,
            leaf_axes,
            degree: 1,
            components,
        })
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn leaf_axes(&self) -> &[usize] {
        &self.leaf_axes
    }

    pub fn leaf_dim(&self) -> usize {
        self.leaf_axes.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[FormComponent] {
        &self.components
    }

    pub fn component(&self, index: &[usize]) -> Option<&ScalarField> {
        self.components
            .iter()
            .find(|c| c.index == index)
            .map(|c| &c.field)
    }

    pub fn coefficient(&self, index: &[usize]) -> ScalarField {
        self.component(index)
            .cloned()
            .unwrap_or_else(|| ScalarField::zeros(self.grid.clone()))
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0, |m, c| m.max(c.field.max_abs()))
    }

    fn check_compatible(&self, other: &TangentialForm) -> Result<()> {
        if !self.grid.same_as(&other.grid) || self.leaf_axes != other.leaf_axes {
            return Err(FolError::GridMismatch(
                "tangential forms live on different charts".to_string(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &TangentialForm) -> Result<TangentialForm> {
        self.check_compatible(other)?;
        if self.degree != other.degree {
            return Err(FolError::GridMismatch("degree mismatch".to_string()));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| {
                Ok(FormComponent {
                    index: a.index.clone(),
                    field: a.field.add(&b.field)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TangentialForm {
            grid: self.grid.clone(),
            leaf_axes: self.leaf_axes.clone(),
            degree: self.degree,
            components,
        })
    }

    pub fn sub(&self, other: &TangentialForm) -> Result<TangentialForm> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> TangentialForm {
        TangentialForm {
            grid: self.grid.clone(),
            leaf_axes: self.leaf_axes.clone(),
            degree: self.degree,
            components: self
                .components
                .iter()
                .map(|comp| FormComponent {
                    index: comp.index.clone(),
                    field: comp.field.scale(c),
                })
                .collect(),
        }
    }

    /// Multiply by a scalar field.
    pub fn mul_scalar(&self, g: &ScalarField) -> Result<TangentialForm> {
        let components = self
            .components
            .iter()
            .map(|comp| {
                Ok(FormComponent {
                    index: comp.index.clone(),
                    field: comp.field.mul(g)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TangentialForm {
            grid: self.grid.clone(),
            leaf_axes: self.leaf_axes.clone(),
            degree: self.degree,
            components,
        })
    }

    pub fn wedge(&self, other: &TangentialForm) -> Result<TangentialForm> {
        self.check_compatible(other)?;
        let degree = self.degree + other.degree;
        let mut out = TangentialForm::zero(self.grid.clone(), self.leaf_axes.clone(), degree);
        for a in &self.components {
            for b in &other.components {
                if let Some((merged, sign)) = merge_sign(&a.index, &b.index) {
                    let term = a.field.mul(&b.field)?.scale(sign);
                    let slot = out
                        .components
                        .iter_mut()
                        .find(|c| c.index == merged)
                        .expect("merged index in range");
                    slot.field = slot.field.add(&term)?;
                }
            }
        }
        Ok(out)
    }

    /// Apply a derivation to every coefficient: used by chart code to build
    /// leafwise exterior derivatives with chart-specific leaf derivatives.
    pub fn map_components(
        &self,
        f: impl Fn(&[usize], &ScalarField) -> Result<ScalarField>,
    ) -> Result<TangentialForm> {
        let components = self
            .components
            .iter()
            .map(|comp| {
                Ok(FormComponent {
                    index: comp.index.clone(),
                    field: f(&comp.index, &comp.field)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TangentialForm {
            grid: self.grid.clone(),
            leaf_axes: self.leaf_axes.clone(),
            degree: self.degree,
            components,
        })
    }

    /// Leafwise exterior derivative where the leaf directions are coordinate
    /// axes (LegendrianChart and CoisoChart plaques): d_F(f dq^I) = Σ ∂_a f dq^a∧dq^I
    /// over leaf axes a ∉ I.
    pub fn coordinate_leaf_d(&self) -> Result<TangentialForm> {
        let n = self.leaf_axes.len();
        if self.degree >= n {
            return Ok(TangentialForm::zero(
                self.grid.clone(),
                self.leaf_axes.clone(),
                self.degree + 1,
            ));
        }
        let mut out = TangentialForm::zero(
            self.grid.clone(),
            self.leaf_axes.clone(),
            self.degree + 1,
        );
        for comp in &self.components {
            for leaf_pos in 0..n {
                if comp.index.contains(&leaf_pos) {
                    continue;
                }
                let pos = comp.index.iter().filter(|&&i| i < leaf_pos).count();
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                let mut index = comp.index.clone();
                index.insert(pos, leaf_pos);
                let axis = self.leaf_axes[leaf_pos];
                let term = comp.field.spectral_partial_axis(axis).scale(sign);
                let slot = out
                    .components
                    .iter_mut()
                    .find(|c| c.index == index)
                    .expect("inserted index in range");
                slot.field = slot.field.add(&term)?;
            }
        }
        Ok(out)
    }
}

/// Max-abs difference of two full forms.
pub fn full_form_diff(a: &FullForm, b: &FullForm) -> f64 {
    a.components()
        .iter()
        .zip(b.components())
        .fold(0.0, |m, (x, y)| {
            m.max(crate::field::max_abs_diff(&x.field, &y.field))
        })
}

/// Max-abs difference of two tangential forms.
pub fn tangential_diff(a: &TangentialForm, b: &TangentialForm) -> f64 {
    a.components()
        .iter()
        .zip(b.components())
        .fold(0.0, |m, (x, y)| {
            m.max(crate::field::max_abs_diff(&x.field, &y.field))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(4, 2).len(), 6);
        assert_eq!(multi_indices(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(multi_indices(2, 3).len(), 0);
        let ix = multi_indices(3, 2);
        assert_eq!(ix, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn merge_signs() {
        assert_eq!(merge_sign(&[0], &[1]), Some((vec![0, 1], 1.0)));
        assert_eq!(merge_sign(&[1], &[0]), Some((vec![0, 1], -1.0)));
        assert_eq!(merge_sign(&[0, 2], &[1]), Some((vec![0, 1, 2], -1.0)));
        assert_eq!(merge_sign(&[1], &[1]), None);
    }

    #[test]
    fn d_squared_vanishes_on_full_forms() {
        let g = PeriodicGrid::new(&["x", "y", "z"], &[16, 16, 16]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| {
            (c[0].sin() * c[1].cos()).exp() * (c[2] + c[0]).sin()
        });
        let sigma = FullForm::scalar(f);
        let dd = sigma.exterior_d().unwrap().exterior_d().unwrap();
        assert!(dd.max_abs() <= 1e-10);
    }

    #[test]
    fn d_of_f_dx_single_mode() {
        // d(sin(q1) dx) = cos(q1) dq1 ∧ dx = -cos(q1) dx ∧ dq1.
        let g = PeriodicGrid::new(&["x", "q1"], &[16, 16]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |c| c[1].sin());
        let form = FullForm::one_form(
            g.clone(),
            vec![f, ScalarField::zeros(g.clone())],
        )
        .unwrap();
        let d = form.exterior_d().unwrap();
        let expect = ScalarField::from_fn(g, |c| -c[1].cos());
        assert!(
            crate::field::max_abs_diff(d.component(&[0, 1]).unwrap(), &expect) <= 1e-10
        );
    }

    #[test]
    fn wedge_anticommutes_on_one_forms() {
        let g = PeriodicGrid::new(&["x", "y", "z"], &[8, 8, 8]).unwrap();
        let a = FullForm::one_form(
            g.clone(),
            vec![
                ScalarField::from_fn(g.clone(), |c| c[0].sin()),
                ScalarField::from_fn(g.clone(), |c| c[1].cos()),
                ScalarField::constant(g.clone(), 0.7),
            ],
        )
        .unwrap();
        let b = FullForm::one_form(
            g.clone(),
            vec![
                ScalarField::from_fn(g.clone(), |c| c[2].cos()),
                ScalarField::constant(g.clone(), -0.3),
                ScalarField::from_fn(g.clone(), |c| (c[0] + c[1]).sin()),
            ],
        )
        .unwrap();
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap().scale(-1.0);
        assert!(full_form_diff(&ab, &ba) <= 1e-12);
    }

    #[test]
    fn contraction_then_wedge_identity() {
        // i_v(a ∧ b) = (i_v a) b - a (i_v b) for one-forms a, b.
        let g = PeriodicGrid::new(&["x", "y"], &[16, 16]).unwrap();
        let a = FullForm::one_form(
            g.clone(),
            vec![
                ScalarField::from_fn(g.clone(), |c| c[0].sin()),
                ScalarField::from_fn(g.clone(), |c| c[1].cos()),
            ],
        )
        .unwrap();
        let b = FullForm::one_form(
            g.clone(),
            vec![
                ScalarField::constant(g.clone(), 1.0),
                ScalarField::from_fn(g.clone(), |c| (c[0] - c[1]).cos()),
            ],
        )
        .unwrap();
        let v = vec![
            ScalarField::from_fn(g.clone(), |c| 1.0 + 0.2 * c[1].sin()),
            ScalarField::from_fn(g.clone(), |c| 0.5 * c[0].cos()),
        ];
        let lhs = a.wedge(&b).unwrap().contract(&v).unwrap();
        let ia = a.contract(&v).unwrap().coefficient(&[]);
        let ib = b.contract(&v).unwrap().coefficient(&[]);
        let rhs = {
            let t1 = FullForm::one_form(
                g.clone(),
                b.components()
                    .iter()
                    .map(|c| c.field.mul(&ia).unwrap())
                    .collect(),
            )
            .unwrap();
            let t2 = FullForm::one_form(
                g,
                a.components()
                    .iter()
                    .map(|c| c.field.mul(&ib).unwrap())
                    .collect(),
            )
            .unwrap();
            t1.sub(&t2).unwrap()
        };
        assert!(full_form_diff(&lhs, &rhs) <= 1e-12);
    }
}
