use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, Rng, Vector};

/// Parameters of `r(x) = R h(Wᵀx + b) + c`.
///
/// `W` and `R` are both `D×H`. A tied model stores a single matrix that
/// serves as encoder and decoder, so writes through [`AeParams::r_mut`]
/// land in `W` as well.
#[derive(Clone, Debug, PartialEq)]
pub struct AeParams {
    w: Matrix,
    r: Option<Matrix>,
    b: Vector,
    c: Vector,
    activation: Activation,
}

impl AeParams {
    /// `r = None` builds a tied model.
    pub fn new(w: Matrix, r: Option<Matrix>, b: Vector, c: Vector, activation: Activation) -> Result<Self> {
        let (d, h) = w.shape();
        if let Some(r) = &r {
            if r.shape() != (d, h) {
                return Err(Error::shape("AeParams::new (R)", format!("{d}x{h}"), format!("{:?}", r.shape())));
            }
        }
        if b.len() != h {
            return Err(Error::shape("AeParams::new (b)", h, b.len()));
        }
        if c.len() != d {
            return Err(Error::shape("AeParams::new (c)", d, c.len()));
        }
        Ok(AeParams { w, r, b, c, activation })
    }

    /// Uniform `(-s, s)` weights with `s = sqrt(6 / (D + H))`, zero biases.
    pub fn init(dim: usize, hidden: usize, activation: Activation, tied: bool, rng: &mut Rng) -> Self {
        let scale = (6.0 / (dim + hidden) as f64).sqrt();
        Self::init_scaled(dim, hidden, activation, tied, scale, rng)
    }

    pub fn init_scaled(dim: usize, hidden: usize, activation: Activation, tied: bool, scale: f64, rng: &mut Rng) -> Self {
        let w = Matrix::random_uniform(dim, hidden, scale, rng);
        let r = (!tied).then(|| Matrix::random_uniform(dim, hidden, scale, rng));
        AeParams {
            w,
            r,
            b: vec![0.0; hidden],
            c: vec![0.0; dim],
            activation,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn is_tied(&self) -> bool {
        self.r.is_none()
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn r(&self) -> &Matrix {
        self.r.as_ref().unwrap_or(&self.w)
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn w_mut(&mut self) -> &mut Matrix {
        &mut self.w
    }

    pub fn r_mut(&mut self) -> &mut Matrix {
        match &mut self.r {
            Some(r) => r,
            None => &mut self.w,
        }
    }

    pub fn b_mut(&mut self) -> &mut Vector {
        &mut self.b
    }

    pub fn c_mut(&mut self) -> &mut Vector {
        &mut self.c
    }

    /// Copy with the decoder split off into its own storage.
    pub fn untied(&self) -> AeParams {
        AeParams {
            r: Some(self.r().clone()),
            ..self.clone()
        }
    }

    /// Parameter blocks in the fixed order `W, [R], b, c`.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = vec![self.w.as_slice()];
        if let Some(r) = &self.r {
            out.push(r.as_slice());
        }
        out.push(&self.b);
        out.push(&self.c);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.w.as_mut_slice()];
        if let Some(r) = &mut self.r {
            out.push(r.as_mut_slice());
        }
        out.push(&mut self.b);
        out.push(&mut self.c);
        out
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_input(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::shape(context, self.dim(), x.len()))
        }
    }

    /// Hidden pre-activation `u = Wᵀx + b`. Assumes `x.len() == D`.
    pub(crate) fn pre_activation(&self, x: &[f64]) -> Vector {
        let mut u = self.b.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (uk, &wik) in u.iter_mut().zip(self.w.row(i)) {
                *uk += wik * xi;
            }
        }
        u
    }

    /// `R·hid + c`. Assumes `hid.len() == H`.
    pub(crate) fn decode(&self, hid: &[f64]) -> Vector {
        let r = self.r();
        (0..self.dim()).map(|i| dot(r.row(i), hid) + self.c[i]).collect()
    }

    pub fn hidden_pre_activation(&self, x: &[f64]) -> Result<Vector> {
        self.check_input(x, "hidden_pre_activation")?;
        Ok(self.pre_activation(x))
    }

    /// `r(x) = R h(Wᵀx + b) + c`.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vector> {
        self.check_input(x, "reconstruct")?;
        Ok(self.reconstruct_unchecked(x))
    }

    pub(crate) fn reconstruct_unchecked(&self, x: &[f64]) -> Vector {
        let act = self.activation;
        let hid: Vector = self.pre_activation(x).into_iter().map(|u| act.apply(u)).collect();
        self.decode(&hid)
    }

    /// `∂r/∂x = R diag(h'(u)) Wᵀ`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        self.check_input(x, "jacobian")?;
        Ok(self.jacobian_unchecked(x))
    }

    pub(crate) fn jacobian_unchecked(&self, x: &[f64]) -> Matrix {
        let act = self.activation;
        let slopes: Vector = self.pre_activation(x).into_iter().map(|u| act.derivative(u)).collect();
        self.jacobian_from_slopes(&slopes)
    }

    pub(crate) fn jacobian_from_slopes(&self, slopes: &[f64]) -> Matrix {
        let d = self.dim();
        let r = self.r();
        let mut scaled_rows: Vec<Vector> = Vec::with_capacity(d);
        for i in 0..d {
            scaled_rows.push(r.row(i).iter().zip(slopes).map(|(a, s)| a * s).collect());
        }
        Matrix::from_fn(d, d, |i, j| dot(&scaled_rows[i], self.w.row(j)))
    }

    /// Closed-form energy `Σ_k H(u_k) - ½‖x - c‖²` (additive constant 0).
    ///
    /// Only defined for tied weights; untied conservative fields must be
    /// integrated numerically.
    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        if !self.is_tied() {
            return Err(Error::Contract(
                "closed-form energy requires tied weights; integrate the field instead".into(),
            ));
        }
        self.check_input(x, "energy")?;
        let act = self.activation;
        let hidden_term: f64 = self.pre_activation(x).into_iter().map(|u| act.antiderivative(u)).sum();
        let quad: f64 = x.iter().zip(&self.c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
        Ok(hidden_term - 0.5 * quad)
    }

    /// Rescales every encoder column so that `‖w_i‖² = alpha`.
    pub fn project_weight_length(&mut self, alpha: f64) -> Result<()> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidInput(format!("weight length must be positive, got {alpha}")));
        }
        let (d, h) = self.w.shape();
        let mut factors = Vec::with_capacity(h);
        for k in 0..h {
            let sq: f64 = (0..d).map(|i| self.w[(i, k)] * self.w[(i, k)]).sum();
            if sq == 0.0 || !sq.is_finite() {
                return Err(Error::ZeroNormColumn { column: k });
            }
            factors.push((alpha / sq).sqrt());
        }
        for i in 0..d {
            for (v, f) in self.w.row_mut(i).iter_mut().zip(&factors) {
                *v *= f;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ParamsDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ParamsDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Weight-length projection returning a fresh copy.
pub fn weight_length_project(p: &AeParams, alpha: f64) -> Result<AeParams> {
    let mut out = p.clone();
    out.project_weight_length(alpha)?;
    Ok(out)
}

/// On-disk layout: `{D, H, activation, tied, W, R, b, c}`, matrices row-major.
#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ParamsDoc {
    D: usize,
    H: usize,
    activation: Activation,
    tied: bool,
    W: Vec<f64>,
    R: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl From<&AeParams> for ParamsDoc {
    fn from(p: &AeParams) -> Self {
        ParamsDoc {
            D: p.dim(),
            H: p.hidden(),
            activation: p.activation,
            tied: p.is_tied(),
            W: p.w.as_slice().to_vec(),
            R: p.r().as_slice().to_vec(),
            b: p.b.clone(),
            c: p.c.clone(),
        }
    }
}

impl TryFrom<ParamsDoc> for AeParams {
    type Error = Error;

    fn try_from(doc: ParamsDoc) -> Result<Self> {
        let w = Matrix::from_vec(doc.D, doc.H, doc.W)?;
        let r = Matrix::from_vec(doc.D, doc.H, doc.R)?;
        let r = if doc.tied {
            if r != w {
                return Err(Error::InvalidInput("tied parameters must have R equal to W".into()));
            }
            None
        } else {
            Some(r)
        };
        let params = AeParams::new(w, r, doc.b, doc.c, doc.activation)?;
        if !params.is_finite() {
            return Err(Error::InvalidInput("parameters contain non-finite values".into()));
        }
        Ok(params)
    }
}
