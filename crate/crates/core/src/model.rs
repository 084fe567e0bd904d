//! Problem data, sign functions, truncation operators and the nonlinear
//! right-hand sides of the coupled system, its regularization and the two
//! homotopy families used by the degree machinery.
//!
//! Sign convention: `sign_unit(0) = +1`. All fractional powers apply to
//! absolute values, so the only singularities are zero denominators, and the
//! regularized denominator `|v + sign_shift(eps, v)|` is bounded below by
//! `eps / 2` everywhere.

use crate::error::{Error, Result};
use crate::grid::{Field, NeumannOperator};

/// Exponents and source parameter of the coupled system.
///
/// Validation enforces `alpha_i` in (0,1), `beta_i` in [0,1), `rho > 0` and
/// the exponent smallness condition
/// `max(alpha1 + 2 beta1, alpha2 + beta2 / 2) < 1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProblemParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    /// Optional magnitude of the first sign-coupling factor (1 = canonical).
    #[serde(default = "one")]
    pub f1_scale: f64,
    /// Optional magnitude of the second sign-coupling factor.
    #[serde(default = "one")]
    pub f2_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ProblemParams {
    pub fn new(alpha1: f64, alpha2: f64, beta1: f64, beta2: f64, rho: f64) -> Result<Self> {
        let p = ProblemParams {
            alpha1,
            alpha2,
            beta1,
            beta2,
            rho,
            f1_scale: 1.0,
            f2_scale: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_scales(mut self, f1_scale: f64, f2_scale: f64) -> Result<Self> {
        self.f1_scale = f1_scale;
        self.f2_scale = f2_scale;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) || !(self.alpha2 > 0.0 && self.alpha2 < 1.0) {
            return bad(format!(
                "alpha exponents must lie in (0,1): {} and {}",
                self.alpha1, self.alpha2
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!(
                "beta exponents must lie in [0,1): {} and {}",
                self.beta1, self.beta2
            ));
        }
        if !(self.rho > 0.0) {
            return bad(format!("rho must be positive: {}", self.rho));
        }
        if !(self.f1_scale > 0.0) || !(self.f2_scale > 0.0) {
            return bad("coupling scales must be positive".into());
        }
        if self.exponent_condition_value() >= 1.0 {
            return bad(format!(
                "exponent condition violated: max(alpha1 + 2 beta1, alpha2 + beta2/2) = {} >= 1",
                self.exponent_condition_value()
            ));
        }
        Ok(())
    }

    /// `max(alpha1 + 2 beta1, alpha2 + beta2 / 2)`; must be < 1.
    pub fn exponent_condition_value(&self) -> f64 {
        (self.alpha1 + 2.0 * self.beta1).max(self.alpha2 + 0.5 * self.beta2)
    }

    /// The variant `max(alpha1 + 2 beta1, alpha2 - beta2)` that the
    /// supersolution estimates actually use; reported in certificates.
    pub fn proof_variant_value(&self) -> f64 {
        (self.alpha1 + 2.0 * self.beta1).max(self.alpha2 - self.beta2)
    }

    pub fn require_beta1_zero(&self) -> Result<()> {
        if self.beta1 != 0.0 {
            return Err(Error::InvalidParams(format!(
                "this pipeline requires beta1 = 0, got {}",
                self.beta1
            )));
        }
        Ok(())
    }
}

/// Which exponents the second homotopy component uses.
///
/// `SystemConsistent` matches the regularized system (alpha2, beta2);
/// `PaperLiteral` reproduces the displayed homotopy verbatim (alpha1, beta1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F2Exponents {
    SystemConsistent,
    PaperLiteral,
}

impl Default for F2Exponents {
    fn default() -> Self {
        F2Exponents::SystemConsistent
    }
}

/// Bundle of data the truncation operators need: the regularization size,
/// the clamp bounds (upper rectangle fields), the principal eigenfunction
/// and the width of the near-zero ramp.
#[derive(Debug, Clone)]
pub struct TruncationEnv {
    pub epsilon: f64,
    pub ubar: Field,
    pub vbar: Field,
    pub phi1: Field,
    pub mu_chi: f64,
}

impl TruncationEnv {
    pub fn new(epsilon: f64, ubar: Field, vbar: Field, phi1: Field, mu_chi: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        if ubar.min() <= 0.0 || vbar.min() <= 0.0 {
            return Err(Error::InvalidParams(
                "clamp bounds must be positive nodewise".into(),
            ));
        }
        if !(mu_chi > 0.0) {
            return Err(Error::InvalidParams("mu_chi must be positive".into()));
        }
        Ok(TruncationEnv {
            epsilon,
            ubar,
            vbar,
            phi1,
            mu_chi,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        TruncationEnv::new(
            epsilon,
            self.ubar.clone(),
            self.vbar.clone(),
            self.phi1.clone(),
            self.mu_chi,
        )
    }
}

/// Unit sign: +1 for `s >= 0`, -1 for `s < 0`.
pub fn sign_unit(s: f64) -> f64 {
    if s >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `eps * (1/2 + sign_unit(s))`: +3eps/2 for `s >= 0`, -eps/2 for `s < 0`.
pub fn sign_shift(eps: f64, s: f64) -> f64 {
    eps * (0.5 + sign_unit(s))
}

/// Symmetric clamp of `s` into `[-bound, bound]`.
pub fn clamp_sym(s: f64, bound: f64) -> f64 {
    s.clamp(-bound, bound)
}

/// Shifted clamp: `sign_shift(eps, s) + clamp_sym(s, bound)`. Its absolute
/// value lies in `[eps/2, 3 eps/2 + bound]` for every `s`.
pub fn shifted_clamp(eps: f64, s: f64, bound: f64) -> f64 {
    sign_shift(eps, s) + clamp_sym(s, bound)
}

/// Piecewise-linear truncation anchored at the eigenfunction value `phi > 0`:
/// `3s/2` above `phi`, `s/2` below `-phi`, `(1/2 + sign_unit(s)) * phi`
/// in between.
pub fn anchored_clamp(phi: f64, s: f64) -> f64 {
    if s >= phi {
        1.5 * s
    } else if s <= -phi {
        0.5 * s
    } else {
        (0.5 + sign_unit(s)) * phi
    }
}

/// Continuous ramp valued in [0,1]: 1 on `[-mu, mu]`, 0 outside
/// `[-2mu, 2mu]`, linear in between.
pub fn near_zero_ramp(mu: f64, s: f64) -> f64 {
    let a = s.abs();
    if a >= 2.0 * mu {
        0.0
    } else if a <= mu {
        1.0
    } else {
        2.0 - a / mu
    }
}

fn powabs(s: f64, e: f64) -> f64 {
    s.abs().powf(e)
}

/// Right-hand side of the coupled system:
/// `g1 = f1_scale * sign(v) * (|u|^a1 / |v|^b1 + rho)`,
/// `g2 = f2_scale * sign(u) * |u|^a2 / |v|^b2`.
///
/// When either beta exponent is positive, a zero node of `v` is a hard
/// singularity error; nothing is regularized here.
pub fn system_rhs(p: &ProblemParams, u: &Field, v: &Field) -> Result<(Field, Field)> {
    let n = u.len();
    if p.beta1 > 0.0 || p.beta2 > 0.0 {
        for i in 0..n {
            if v.values()[i] == 0.0 {
                return Err(Error::Singularity {
                    node: i,
                    context: "system right-hand side",
                });
            }
        }
    }
    let g1 = u.zip(v, |ui, vi| {
        p.f1_scale * sign_unit(vi) * (powabs(ui, p.alpha1) / powabs(vi, p.beta1) + p.rho)
    });
    let g2 = u.zip(v, |ui, vi| {
        p.f2_scale * sign_unit(ui) * powabs(ui, p.alpha2) / powabs(vi, p.beta2)
    });
    Ok((g1, g2))
}

/// Right-hand side of the regularized system (`beta1 = 0` required):
/// `g1 = f1_scale * sign(v) * (|u|^a1 + rho)`,
/// `g2 = f2_scale * sign(u) * |u|^a2 / |v + sign_shift(eps, v)|^b2`.
pub fn regularized_rhs(p: &ProblemParams, eps: f64, u: &Field, v: &Field) -> Result<(Field, Field)> {
    p.require_beta1_zero()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!(
            "epsilon must lie in (0,1), got {eps}"
        )));
    }
    let g1 = u.zip(v, |ui, vi| {
        p.f1_scale * sign_unit(vi) * (powabs(ui, p.alpha1) + p.rho)
    });
    let g2 = u.zip(v, |ui, vi| {
        let denom = vi + sign_shift(eps, vi);
        // sign_unit(0) = +1 keeps |denom| >= eps/2 for every v.
        debug_assert!(denom.abs() >= 0.5 * eps - 1e-300);
        p.f2_scale * sign_unit(ui) * powabs(ui, p.alpha2) / powabs(denom, p.beta2)
    });
    Ok((g1, g2))
}

fn f2_exponents(p: &ProblemParams, choice: F2Exponents) -> (f64, f64) {
    match choice {
        F2Exponents::SystemConsistent => (p.alpha2, p.beta2),
        F2Exponents::PaperLiteral => (p.alpha1, p.beta1),
    }
}

/// Homotopy right-hand side connecting the truncated regularized system
/// (`t = 1`) to the solution-free anchor problem `(u+ + 1, v+ + 1)`
/// (`t = 0`).
pub fn homotopy_rhs(
    p: &ProblemParams,
    env: &TruncationEnv,
    t: f64,
    u: &Field,
    v: &Field,
    choice: F2Exponents,
) -> (Field, Field) {
    let (a2, b2) = f2_exponents(p, choice);
    let eps = env.epsilon;
    let n = u.len();
    let mut g1 = Vec::with_capacity(n);
    let mut g2 = Vec::with_capacity(n);
    for i in 0..n {
        let ui = u.values()[i];
        let vi = v.values()[i];
        let tu = clamp_sym(ui, env.ubar.values()[i]);
        let tv = shifted_clamp(eps, vi, env.vbar.values()[i]);
        g1.push(
            t * p.f1_scale * sign_unit(vi) * (powabs(tu, p.alpha1) + p.rho)
                + (1.0 - t) * (ui.max(0.0) + 1.0),
        );
        g2.push(
            t * p.f2_scale * sign_unit(ui) * powabs(tu, a2) / powabs(tv, b2)
                + (1.0 - t) * (vi.max(0.0) + 1.0),
        );
    }
    (
        Field::from_values(u.grid(), g1).expect("finite"),
        Field::from_values(u.grid(), g2).expect("finite"),
    )
}

/// Homotopy right-hand side anchored at the principal eigenfunction: the
/// `t = 0` member is the decoupled anchored-clamp problem whose fixed point
/// contains the eigenfunction itself.
pub fn anchored_homotopy_rhs(
    p: &ProblemParams,
    env: &TruncationEnv,
    lambda1: f64,
    t: f64,
    u: &Field,
    v: &Field,
    choice: F2Exponents,
) -> (Field, Field) {
    let (a2, b2) = f2_exponents(p, choice);
    let eps = env.epsilon;
    let n = u.len();
    let anchor = 2.0 / 3.0 * (1.0 - t) * lambda1;
    let mut g1 = Vec::with_capacity(n);
    let mut g2 = Vec::with_capacity(n);
    for i in 0..n {
        let ui = u.values()[i];
        let vi = v.values()[i];
        let phi = env.phi1.values()[i];
        let tu = clamp_sym(ui, env.ubar.values()[i]);
        let tv = shifted_clamp(eps, vi, env.vbar.values()[i]);
        g1.push(
            t * p.f1_scale * sign_unit(vi) * (powabs(tu, p.alpha1) + p.rho)
                + anchor * anchored_clamp(phi, ui),
        );
        g2.push(
            t * p.f2_scale * sign_unit(ui) * powabs(tu, a2) / powabs(tv, b2)
                + anchor * anchored_clamp(phi, vi),
        );
    }
    (
        Field::from_values(u.grid(), g1).expect("finite"),
        Field::from_values(u.grid(), g2).expect("finite"),
    )
}

/// Residual of the discrete system at `(u, v)`.
#[derive(Debug, Clone)]
pub struct ResidualPair {
    pub r1: Field,
    pub r2: Field,
    pub sup1: f64,
    pub sup2: f64,
}

impl ResidualPair {
    pub fn sup(&self) -> f64 {
        self.sup1.max(self.sup2)
    }
}

/// `r1 = A u - g1`, `r2 = A v - g2` with their sup norms.
pub fn system_residual(
    op: &NeumannOperator,
    p: &ProblemParams,
    u: &Field,
    v: &Field,
) -> Result<ResidualPair> {
    let (g1, g2) = system_rhs(p, u, v)?;
    let r1 = op.apply(u).sub(&g1);
    let r2 = op.apply(v).sub(&g2);
    let (sup1, sup2) = (r1.sup_norm(), r2.sup_norm());
    Ok(ResidualPair { r1, r2, sup1, sup2 })
}

/// Additive forcings `(c1, c2)` making `(u_star, v_star)` an exact solution
/// of `A u = g1 + c1`, `A v = g2 + c2` (method of manufactured solutions).
pub fn manufactured_forcing(
    op: &NeumannOperator,
    p: &ProblemParams,
    u_star: &Field,
    v_star: &Field,
) -> Result<(Field, Field)> {
    let (g1, g2) = system_rhs(p, u_star, v_star)?;
    Ok((op.apply(u_star).sub(&g1), op.apply(v_star).sub(&g2)))
}

/// Manufactured forcings against the regularized right-hand side at a fixed
/// `eps`; this variant never hits a singularity.
pub fn manufactured_forcing_regularized(
    op: &NeumannOperator,
    p: &ProblemParams,
    eps: f64,
    u_star: &Field,
    v_star: &Field,
) -> Result<(Field, Field)> {
    let (g1, g2) = regularized_rhs(p, eps, u_star, v_star)?;
    Ok((op.apply(u_star).sub(&g1), op.apply(v_star).sub(&g2)))
}
