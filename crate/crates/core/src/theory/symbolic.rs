use num_rational::BigRational;
use serde::Serialize;

use super::polynomial::{format_monomial, MultivariatePolynomial};
use crate::error::{MkrError, Result};

pub type Polynomial = MultivariatePolynomial<BigRational>;

pub const DEFAULT_TERM_BUDGET: usize = 1_000_000;
pub const MAX_SYMBOLIC_LAYERS: usize = 3;
pub const MAX_SYMBOLIC_DIM: usize = 2;

/// Order of the per-layer symbols.
const LAYER_SYMBOLS: [&str; 6] = ["wvv", "wev", "wve", "wee", "bv", "be"];

/// Symbolic outputs of `L` stacked cross&compress layers.
///
/// Variables are laid out as `v1..vd, e1..ed`, then for each layer the six
/// weight/bias vectors in the order `w_vv, w_ev, w_ve, w_ee, b_v, b_e`.
#[derive(Clone, Debug)]
pub struct SymbolicExpansion {
    pub layers: usize,
    pub dim: usize,
    pub names: Vec<String>,
    pub v: Vec<Polynomial>,
    pub e: Vec<Polynomial>,
}

impl SymbolicExpansion {
    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    /// Index of component `j` of layer `layer`'s symbol `sym` (0..6, see
    /// `LAYER_SYMBOLS`).
    pub fn weight_var(&self, layer: usize, sym: usize, j: usize) -> usize {
        weight_var(self.dim, layer, sym, j)
    }

    pub fn sum_v(&self) -> Polynomial {
        sum(&self.v, self.nvars())
    }

    pub fn sum_e(&self) -> Polynomial {
        sum(&self.e, self.nvars())
    }
}

fn weight_var(dim: usize, layer: usize, sym: usize, j: usize) -> usize {
    2 * dim + layer * 6 * dim + sym * dim + j
}

fn sum(ps: &[Polynomial], nvars: usize) -> Polynomial {
    ps.iter().fold(Polynomial::zero(nvars), |acc, p| &acc + p)
}

fn variable_names(layers: usize, dim: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=dim).map(|i| format!("v{i}")).collect();
    names.extend((1..=dim).map(|i| format!("e{i}")));
    for l in 1..=layers {
        for sym in LAYER_SYMBOLS {
            names.extend((1..=dim).map(|j| format!("{sym}{l}_{j}")));
        }
    }
    names
}

fn within(p: Polynomial, budget: usize) -> Result<Polynomial> {
    if p.num_terms() > budget {
        return Err(MkrError::TermBudget(format!("{} terms exceed budget {budget}", p.num_terms())));
    }
    Ok(p)
}

pub fn symbolic_cross_compress(layers: usize, dim: usize) -> Result<SymbolicExpansion> {
    symbolic_cross_compress_within(layers, dim, DEFAULT_TERM_BUDGET)
}

/// Expands `v' = v (eᵀ w_vv) + e (vᵀ w_ev) + b_v`, `e' = v (eᵀ w_ve) + e (vᵀ w_ee) + b_e`
/// layer by layer with exact rational arithmetic.
pub fn symbolic_cross_compress_within(layers: usize, dim: usize, budget: usize) -> Result<SymbolicExpansion> {
    if layers == 0 || layers > MAX_SYMBOLIC_LAYERS || dim == 0 || dim > MAX_SYMBOLIC_DIM {
        return Err(MkrError::contract(format!(
            "symbolic expansion limited to 1..={MAX_SYMBOLIC_LAYERS} layers and 1..={MAX_SYMBOLIC_DIM} dims, got L={layers}, d={dim}"
        )));
    }
    let names = variable_names(layers, dim);
    let n = names.len();
    let mut v: Vec<Polynomial> = (0..dim).map(|i| Polynomial::var(n, i)).collect();
    let mut e: Vec<Polynomial> = (0..dim).map(|i| Polynomial::var(n, dim + i)).collect();

    for l in 0..layers {
        let sym = |s: usize| -> Vec<Polynomial> { (0..dim).map(|j| Polynomial::var(n, weight_var(dim, l, s, j))).collect() };
        let dot = |xs: &[Polynomial], ws: &[Polynomial]| -> Result<Polynomial> {
            let mut acc = Polynomial::zero(n);
            for (x, w) in xs.iter().zip(ws) {
                acc = within(&acc + &x.mul_within(w, budget)?, budget)?;
            }
            Ok(acc)
        };
        let e_vv = dot(&e, &sym(0))?;
        let v_ev = dot(&v, &sym(1))?;
        let e_ve = dot(&e, &sym(2))?;
        let v_ee = dot(&v, &sym(3))?;
        let (b_v, b_e) = (sym(4), sym(5));

        let mut v_next = Vec::with_capacity(dim);
        let mut e_next = Vec::with_capacity(dim);
        for i in 0..dim {
            let a = v[i].mul_within(&e_vv, budget)?;
            let b = e[i].mul_within(&v_ev, budget)?;
            v_next.push(within(&(&a + &b) + &b_v[i], budget)?);
            let a = v[i].mul_within(&e_ve, budget)?;
            let b = e[i].mul_within(&v_ee, budget)?;
            e_next.push(within(&(&a + &b) + &b_e[i], budget)?);
        }
        v = v_next;
        e = e_next;
    }
    Ok(SymbolicExpansion {
        layers,
        dim,
        names,
        v,
        e,
    })
}

/// Highest v- and e-degree among the cross terms (terms with positive
/// degree in both) of one polynomial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossDegree {
    pub max_v_degree: u32,
    pub max_e_degree: u32,
    /// A cross term attaining the maximal v-degree, with its coefficient.
    pub witness: Option<String>,
}

pub fn cross_degree(p: &Polynomial, dim: usize, names: &[String]) -> CrossDegree {
    let mut out = CrossDegree {
        max_v_degree: 0,
        max_e_degree: 0,
        witness: None,
    };
    let mut best = (0, 0);
    for (exps, c) in p.terms() {
        let dv = Polynomial::degree_of(exps, 0..dim);
        let de = Polynomial::degree_of(exps, dim..2 * dim);
        if dv == 0 || de == 0 {
            continue;
        }
        out.max_v_degree = out.max_v_degree.max(dv);
        out.max_e_degree = out.max_e_degree.max(de);
        if (dv, de) > best {
            best = (dv, de);
            out.witness = Some(format!("({c})·{}", format_monomial(exps, names)));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub layers: usize,
    pub dim: usize,
    pub expected_degree: u32,
    /// Over `Σᵢ v_L⁽ⁱ⁾`.
    pub v_sum: CrossDegree,
    /// Over `Σᵢ e_L⁽ⁱ⁾`.
    pub e_sum: CrossDegree,
    pub terms: usize,
    pub passed: bool,
}

/// The maximal cross-term degree in v and in e of the summed layer-L
/// outputs must both be `2^(L−1)`.
pub fn check_theorem1(layers: usize, dim: usize) -> Result<Theorem1Report> {
    let x = symbolic_cross_compress(layers, dim)?;
    let expected = 1u32 << (layers - 1);
    let (sv, se) = (x.sum_v(), x.sum_e());
    let v_sum = cross_degree(&sv, dim, &x.names);
    let e_sum = cross_degree(&se, dim, &x.names);
    let ok = |c: &CrossDegree| c.max_v_degree == expected && c.max_e_degree == expected;
    Ok(Theorem1Report {
        layers,
        dim,
        expected_degree: expected,
        passed: ok(&v_sum) && ok(&e_sum),
        terms: sv.num_terms() + se.num_terms(),
        v_sum,
        e_sum,
    })
}
