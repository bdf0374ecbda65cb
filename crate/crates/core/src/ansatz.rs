//! The two co-closed families `(φ±, ψ±)` and their torsion, Laplacian,
//! type decomposition and curl.

use num_traits::{Float, Zero};

use crate::forms::{FormError, GeometryParams, Horizontal, InvariantForm, Monomial};
use crate::scalar::{int, rat, solve_linear, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnsatzError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("psi is not closed: d(psi) = {0}")]
    NotCoclosed(String),
}

/// `x · (η₂₃∧ω₁ + η₃₁∧ω₂)`.
pub fn horizontal_pair(x: &Scalar) -> InvariantForm {
    (InvariantForm::etas_wedge(&[2, 3], Horizontal::Omega1)
        + InvariantForm::etas_wedge(&[3, 1], Horizontal::Omega2))
    .scale(x)
}

fn e12w3(x: &Scalar) -> InvariantForm {
    InvariantForm::etas_wedge(&[1, 2], Horizontal::Omega3).scale(x)
}

fn vol_n(x: &Scalar) -> InvariantForm {
    InvariantForm::vol_n().scale(x)
}

/// `φ = ε a²b η₁₂₃ − a q (η₁∧ω₁ + η₂∧ω₂) − ε b q η₃∧ω₃`.
pub fn phi_form(p: &GeometryParams) -> InvariantForm {
    let (a, b, q, e) = (p.a(), p.b(), p.q(), p.eps().as_scalar());
    InvariantForm::etas(&[1, 2, 3]).scale(&(&e * a * a * b))
        - (InvariantForm::etas_wedge(&[1], Horizontal::Omega1)
            + InvariantForm::etas_wedge(&[2], Horizontal::Omega2))
        .scale(&(a * q))
        - InvariantForm::etas_wedge(&[3], Horizontal::Omega3).scale(&(&e * b * q))
}

/// `ψ = q² vol_N − ε a b q (η₂₃∧ω₁ + η₃₁∧ω₂) − a² q η₁₂∧ω₃`.
pub fn psi_form(p: &GeometryParams) -> InvariantForm {
    let (a, b, q, e) = (p.a(), p.b(), p.q(), p.eps().as_scalar());
    vol_n(&(q * q)) - horizontal_pair(&(&e * a * b * q)) - e12w3(&(a * a * q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Ansatz {
    params: GeometryParams,
    phi: InvariantForm,
    psi: InvariantForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionData {
    pub tau0: Scalar,
    pub tau3: InvariantForm,
    pub tau3_norm_sq: Scalar,
}

/// Both sides of `π₁(dτ₃) = (1/7)|τ₃|² ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtau3Check {
    pub projected: InvariantForm,
    pub expected: InvariantForm,
}

impl Dtau3Check {
    pub fn holds(&self) -> bool {
        self.projected == self.expected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecomposition {
    pub pi1: InvariantForm,
    pub pi7: InvariantForm,
    pub pi27: InvariantForm,
    /// `⋆π₂₇ ∧ φ = 0` and `⋆π₂₇ ∧ ψ = 0`.
    pub certified: bool,
}

impl G2Ansatz {
    /// Builds `(φ, ψ)` and checks `dψ = 0`.
    pub fn build(params: GeometryParams) -> Result<Self, AnsatzError> {
        let phi = phi_form(&params);
        let psi = psi_form(&params);
        let dpsi = psi.d();
        if !dpsi.is_zero() {
            return Err(AnsatzError::NotCoclosed(dpsi.to_string()));
        }
        Ok(G2Ansatz { params, phi, psi })
    }

    pub fn params(&self) -> &GeometryParams {
        &self.params
    }

    pub fn phi(&self) -> &InvariantForm {
        &self.phi
    }

    pub fn psi(&self) -> &InvariantForm {
        &self.psi
    }

    pub fn star(&self, form: &InvariantForm) -> Result<InvariantForm, FormError> {
        form.star(&self.params)
    }

    pub fn dphi(&self) -> InvariantForm {
        self.phi.d()
    }

    /// Closed-form `dφ` as printed for the family.
    pub fn dphi_printed(&self) -> InvariantForm {
        let p = &self.params;
        let (a, b, q, e) = (p.a(), p.b(), p.q(), p.eps().as_scalar());
        let a2 = a * a;
        vol_n(&(int(4) * (int(2) * a + &e * b) * q))
            + horizontal_pair(&(int(-2) * &e * b * (&a2 + q)))
            + e12w3(&(int(-2) * &e * (&a2 * b + int(2) * &e * a * q - b * q)))
    }

    /// `τ₀ = (1/7) ⋆(dφ ∧ φ)`.
    pub fn tau0(&self) -> Scalar {
        let top = self.dphi().wedge(&self.phi);
        let scalar = top.star(&self.params).expect("7-form is homogeneous");
        scalar.coefficient(Monomial::UNIT) / int(7)
    }

    /// `τ₀ = (4/7)(4a(a² + q) + εb(2a² − q)) / (a² q)`.
    pub fn tau0_closed_form(&self) -> Scalar {
        let p = &self.params;
        let (a, b, q, e) = (p.a(), p.b(), p.q(), p.eps().as_scalar());
        let a2 = a * a;
        rat(4, 7) * (int(4) * a * (&a2 + q) + e * b * (int(2) * &a2 - q)) / (&a2 * q)
    }

    /// `τ₃ = ⋆dφ − τ₀ φ`, from `dφ = τ₀ ψ + ⋆τ₃`.
    pub fn torsion(&self) -> TorsionData {
        let tau0 = self.tau0();
        let star_dphi = self.dphi().star(&self.params).expect("homogeneous");
        let tau3 = star_dphi - self.phi.scale(&tau0);
        let tau3_norm_sq = tau3.norm_sq(&self.params).expect("homogeneous");
        TorsionData {
            tau0,
            tau3,
            tau3_norm_sq,
        }
    }

    pub fn verify_dtau3_lemma(&self) -> Dtau3Check {
        let t = self.torsion();
        let dtau3 = t.tau3.d();
        let coef = dtau3.inner(&self.psi, &self.params).expect("degree 4") / int(7);
        Dtau3Check {
            projected: self.psi.scale(&coef),
            expected: self.psi.scale(&(t.tau3_norm_sq / int(7))),
        }
    }

    /// `Δψ = d⋆dφ` (ψ is closed).
    pub fn laplacian_psi(&self) -> InvariantForm {
        self.dphi().star(&self.params).expect("homogeneous").d()
    }

    /// Closed-form `Δψ` as printed for the family.
    pub fn laplacian_printed(&self) -> InvariantForm {
        let p = &self.params;
        let (a, b, q, e) = (p.a(), p.b(), p.q(), p.eps().as_scalar());
        let (a2, b2) = (a * a, b * b);
        let two = int(2);
        let bq_a = &e * b * q / a;
        let b2q_a2 = &b2 * q / &a2;
        let a3b_q = &e * &a2 * a * b / q;
        let a2b2_q = &a2 * &b2 / q;
        let vol = int(8) * (&two * &a2 + &b2 + &two * q + &two * &bq_a - &b2q_a2);
        let pair = int(-4) * (&b2 + int(4) * &a3b_q + &two * &a2b2_q + &two * &bq_a - &b2q_a2);
        let w3 = int(-4)
            * (&two * &a2 - &b2 + &two * q + int(4) * &a3b_q + &two * &a2b2_q - &two * &bq_a
                + &b2q_a2);
        vol_n(&vol) + horizontal_pair(&pair) + e12w3(&w3)
    }

    /// `dφ = κ ψ`.
    pub fn is_nearly_g2(&self, kappa: &Scalar) -> bool {
        self.dphi() == self.psi.scale(kappa)
    }

    /// Splits a 4-form into its `Ω⁴₁`, `Ω⁴₇` and `Ω⁴₂₇` parts. The `Ω⁴₇`
    /// part is the orthogonal projection onto `span{η_i ∧ φ}`.
    pub fn type_project_4form(&self, rho: &InvariantForm) -> Result<TypeDecomposition, FormError> {
        rho.expect_degree(4)?;
        let p = &self.params;
        let pi1 = self.psi.scale(&(rho.inner(&self.psi, p)? / int(7)));

        let basis: Vec<InvariantForm> = (1..=3).map(|i| InvariantForm::eta(i).wedge(&self.phi)).collect();
        let mut gram = vec![vec![Scalar::zero(); 3]; 3];
        let mut rhs = vec![Scalar::zero(); 3];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] = basis[i].inner(&basis[j], p)?;
            }
            rhs[i] = rho.inner(&basis[i], p)?;
        }
        let coeffs = solve_linear(gram, rhs).expect("η_i∧φ are linearly independent");
        let mut pi7 = InvariantForm::zero();
        for (c, f) in coeffs.iter().zip(&basis) {
            pi7 += &f.scale(c);
        }

        let pi27 = &(rho - &pi1) - &pi7;
        let star27 = pi27.star(p)?;
        let certified = star27.wedge(&self.phi).is_zero() && star27.wedge(&self.psi).is_zero();
        if !certified {
            log::warn!("Ω⁴₂₇ component of {rho} fails the wedge certificate");
        }
        Ok(TypeDecomposition {
            pi1,
            pi7,
            pi27,
            certified,
        })
    }

    /// `curl X = ⋆(dX ∧ ψ)` on invariant 1-forms.
    pub fn curl(&self, x: &InvariantForm) -> Result<InvariantForm, FormError> {
        x.expect_degree(1)?;
        x.d().wedge(&self.psi).star(&self.params)
    }
}

/// Floating-point `(τ₀, |τ₃|²)` at `(a, b, c)` from the closed forms, used
/// along numerical trajectories.
pub fn torsion_scalars<T: Float>(a: T, b: T, c: T, eps: T) -> (T, T) {
    let n = |x: f64| T::from(x).expect("float constant");
    let q = c * c;
    let a2 = a * a;
    let tau0 = n(4.0 / 7.0) * (n(4.0) * a * (a2 + q) + eps * b * (n(2.0) * a2 - q)) / (a2 * q);
    // |dφ|² from the three printed coefficients and the monomial norms
    let vol = n(4.0) * (n(2.0) * a + eps * b) * q;
    let pair = n(-2.0) * eps * b * (a2 + q);
    let w3 = n(-2.0) * eps * (a2 * b + n(2.0) * eps * a * q - b * q);
    let dphi_sq = vol * vol / (q * q * q * q)
        + n(4.0) * pair * pair / (a2 * b * b * q * q)
        + n(2.0) * w3 * w3 / (a2 * a2 * q * q);
    (tau0, dphi_sq - n(7.0) * tau0 * tau0)
}
