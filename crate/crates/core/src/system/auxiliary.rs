use super::{DiscreteSolution, ProblemData};
use crate::constitutive::Tensor2;
use crate::dgops::{lifting, Analytic, Difference};
use crate::error::{Error, Result};
use crate::femspace::{l2_project, Discretization, Field};

/// The LDG variables eliminated from the system.
#[derive(Clone, Debug)]
pub struct AuxiliaryFields {
    /// `L_h = G_h v_h + R_h v*`.
    pub l_h: Field,
    /// `Π S(L_h^sym)`.
    pub s_h: Field,
    /// `Π (v_h ⊗ v_h)`.
    pub k_h: Field,
}

/// Recovers `L_h`, `S_h` and `K_h` from a discrete solution.
///
/// `L_h` lies in the broken tensor space exactly: the broken gradient has
/// degree `k − 1` and the lifting degree `k`.
pub fn reconstruct_auxiliary(solution: &DiscreteSolution, data: &ProblemData, disc: &Discretization) -> Result<AuxiliaryFields> {
    let v = &solution.velocity;
    if !v.space().same_mesh(&disc.velocity) {
        return Err(Error::Mismatch("solution lives on a different mesh".into()));
    }
    let vstar = {
        let value = data.boundary.clone();
        let gradient = data.boundary_gradient.clone();
        Analytic::new(move |x| value(x), move |x| gradient(x))
    };
    let grad = l2_project(&disc.tensor, &disc.rule, |cell, xi, _, out| {
        let g = v.evaluate_gradient(cell, xi).expect("cell in range");
        out.copy_from_slice(&[g[0][0], g[0][1], g[1][0], g[1][1]]);
    })?;
    let lift = lifting(disc, &Difference(v, &vstar))?;
    let coeffs = grad.coeffs().iter().zip(lift.coeffs()).map(|(a, b)| a - b).collect();
    let l_h = Field::new(disc.tensor.clone(), coeffs)?;
    let law = data.law;
    let s_h = l2_project(&disc.tensor, &disc.rule, |cell, xi, _, out| {
        let l = Tensor2::from_array(l_h.evaluate(cell, xi).expect("cell in range").try_into().expect("four entries"));
        out.copy_from_slice(&law.stress(l).to_array());
    })?;
    let k_h = l2_project(&disc.tensor, &disc.rule, |cell, xi, _, out| {
        let w = v.evaluate(cell, xi).expect("cell in range");
        out.copy_from_slice(&Tensor2::outer([w[0], w[1]], [w[0], w[1]]).to_array());
    })?;
    Ok(AuxiliaryFields { l_h, s_h, k_h })
}

/// Transfers a solution from a mesh to its red refinement.
///
/// Both spaces are nested, so the transfer is exact: broken velocities are
/// projected cell by cell from the parent, pressure nodes are evaluated.
pub fn prolongate(coarse: &DiscreteSolution, coarse_disc: &Discretization, fine_disc: &Discretization) -> Result<DiscreteSolution> {
    let parents = fine_disc
        .mesh
        .parents()
        .ok_or_else(|| Error::Mismatch("fine mesh carries no parent map".into()))?;
    if parents.iter().any(|&p| p >= coarse_disc.num_cells()) || !coarse.velocity.space().same_mesh(&coarse_disc.velocity) {
        return Err(Error::Mismatch("parent map does not match the coarse mesh".into()));
    }
    if coarse_disc.degree != fine_disc.degree {
        return Err(Error::Mismatch("polynomial degrees differ between levels".into()));
    }
    let velocity = l2_project(&fine_disc.velocity, &fine_disc.rule, |cell, _, x, out| {
        let p = parents[cell];
        let xi = coarse_disc.geometry[p].inverse_map(x);
        let v = coarse.velocity.evaluate(p, xi).expect("parent in range");
        out.copy_from_slice(&v);
    })?;
    let mut pressure = Field::zeros(fine_disc.pressure.clone());
    let coords = fine_disc.pressure.node_coordinates().expect("continuous space");
    let npl = fine_disc.np();
    for cell in 0..fine_disc.num_cells() {
        let p = parents[cell];
        for i in 0..npl {
            let dof = fine_disc.pressure.dof(cell, 0, i);
            let xi = coarse_disc.geometry[p].inverse_map(coords[dof]);
            pressure.coeffs_mut()[dof] = coarse.pressure.evaluate(p, xi)?[0];
        }
    }
    Ok(DiscreteSolution { velocity, pressure, multiplier: coarse.multiplier })
}
