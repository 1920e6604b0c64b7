//! Mamdani fuzzy inference with Gaussian membership functions.
//!
//! Antecedent clauses are combined with `min`, optionally complemented
//! (`1 - mu`), implication clips each consequent at the rule strength,
//! clipped shapes are aggregated with `max`, and the crisp output is the
//! centroid of the aggregate sampled uniformly over the output universe.
//!
//! [`FisDefinition`] is the plain, serializable description. Inference in a
//! hot loop should go through [`CompiledFis`], which resolves names to
//! indices and tabulates every output membership function once.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of samples per output universe used for defuzzification.
pub const DEFAULT_DEFUZZ_RESOLUTION: usize = 201;

/// Smallest accepted `defuzz_resolution`.
pub const MIN_DEFUZZ_RESOLUTION: usize = 11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FisError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing input value for variable `{0}`")]
    MissingInput(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown membership function `{mf}` on variable `{variable}`")]
    UnknownMembership { variable: String, mf: String },
    #[error("invalid fuzzy system: {0}")]
    Invalid(String),
    #[error("could not parse fuzzy system: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FisError>;

/// Gaussian membership function `exp(-(x - center)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    pub label: String,
    pub center: f64,
    pub sigma: f64,
}

impl MembershipFunction {
    pub fn new(label: impl Into<String>, center: f64, sigma: f64) -> Self {
        Self {
            label: label.into(),
            center,
            sigma,
        }
    }

    /// Degree of membership, skipping parameter validation.
    #[inline]
    pub fn degree(&self, x: f64) -> f64 {
        gaussian(x, self.center, self.sigma)
    }
}

#[inline]
fn gaussian(x: f64, center: f64, sigma: f64) -> f64 {
    let z = (x - center) / sigma;
    (-0.5 * z * z).exp()
}

/// Validated Gaussian membership evaluation.
pub fn gaussian_membership(x: f64, mf: &MembershipFunction) -> Result<f64> {
    if !x.is_finite() {
        return Err(FisError::InvalidParameter(format!("non-finite input {x}")));
    }
    if !(mf.sigma > 0.0) || !mf.sigma.is_finite() {
        return Err(FisError::InvalidParameter(format!(
            "sigma of `{}` must be positive, got {}",
            mf.label, mf.sigma
        )));
    }
    if !mf.center.is_finite() {
        return Err(FisError::InvalidParameter(format!(
            "center of `{}` must be finite",
            mf.label
        )));
    }
    Ok(mf.degree(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyVariable {
    pub name: String,
    /// Closed interval `[lo, hi]`.
    pub universe: [f64; 2],
    pub mfs: Vec<MembershipFunction>,
}

impl FuzzyVariable {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, mfs: Vec<MembershipFunction>) -> Self {
        Self {
            name: name.into(),
            universe: [lo, hi],
            mfs,
        }
    }

    pub fn lo(&self) -> f64 {
        self.universe[0]
    }

    pub fn hi(&self) -> f64 {
        self.universe[1]
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo(), self.hi())
    }

    pub fn mf(&self, label: &str) -> Option<&MembershipFunction> {
        self.mfs.iter().find(|m| m.label == label)
    }

    fn mf_index(&self, label: &str) -> Result<usize> {
        self.mfs
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| FisError::UnknownMembership {
                variable: self.name.clone(),
                mf: label.to_string(),
            })
    }

    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.universe;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FisError::Invalid(format!(
                "variable `{}` has an empty universe [{lo}, {hi}]",
                self.name
            )));
        }
        if self.mfs.is_empty() {
            return Err(FisError::Invalid(format!(
                "variable `{}` has no membership functions",
                self.name
            )));
        }
        for (i, mf) in self.mfs.iter().enumerate() {
            if !(mf.sigma > 0.0 && mf.sigma.is_finite()) {
                return Err(FisError::InvalidParameter(format!(
                    "`{}.{}` sigma must be positive, got {}",
                    self.name, mf.label, mf.sigma
                )));
            }
            if !(mf.center >= lo && mf.center <= hi) {
                return Err(FisError::Invalid(format!(
                    "`{}.{}` center {} outside universe [{lo}, {hi}]",
                    self.name, mf.label, mf.center
                )));
            }
            if self.mfs[..i].iter().any(|m| m.label == mf.label) {
                return Err(FisError::Invalid(format!(
                    "`{}` declares label `{}` twice",
                    self.name, mf.label
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleClause {
    pub var: String,
    pub mf: String,
    #[serde(default, rename = "not", skip_serializing_if = "std::ops::Not::not")]
    pub negated: bool,
}

impl RuleClause {
    pub fn is(var: &str, mf: &str) -> Self {
        Self {
            var: var.into(),
            mf: mf.into(),
            negated: false,
        }
    }

    pub fn is_not(var: &str, mf: &str) -> Self {
        Self {
            var: var.into(),
            mf: mf.into(),
            negated: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consequent {
    pub var: String,
    pub mf: String,
}

fn default_weight() -> f64 {
    1.0
}

/// Conjunctive rule: `IF c1 AND c2 ... THEN out1 IS a, out2 IS b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    #[serde(rename = "if")]
    pub antecedents: Vec<RuleClause>,
    #[serde(rename = "then")]
    pub consequents: Vec<Consequent>,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisDefinition {
    pub defuzz_resolution: usize,
    pub inputs: Vec<FuzzyVariable>,
    pub outputs: Vec<FuzzyVariable>,
    pub rules: Vec<Rule>,
}

impl FisDefinition {
    pub fn input(&self, name: &str) -> Option<&FuzzyVariable> {
        self.inputs.iter().find(|v| v.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&FuzzyVariable> {
        self.outputs.iter().find(|v| v.name == name)
    }

    pub fn output_mut(&mut self, name: &str) -> Option<&mut FuzzyVariable> {
        self.outputs.iter_mut().find(|v| v.name == name)
    }

    /// Checks every structural invariant; [`CompiledFis::new`] calls this.
    pub fn validate(&self) -> Result<()> {
        if self.defuzz_resolution < MIN_DEFUZZ_RESOLUTION {
            return Err(FisError::InvalidParameter(format!(
                "defuzz_resolution must be at least {MIN_DEFUZZ_RESOLUTION}, got {}",
                self.defuzz_resolution
            )));
        }
        if self.inputs.is_empty() || self.outputs.is_empty() {
            return Err(FisError::Invalid("need at least one input and one output".into()));
        }
        let vars = self.inputs.iter().chain(&self.outputs);
        for (i, v) in vars.clone().enumerate() {
            v.validate()?;
            if vars.clone().take(i).any(|o| o.name == v.name) {
                return Err(FisError::Invalid(format!("variable `{}` declared twice", v.name)));
            }
        }
        if self.rules.is_empty() {
            return Err(FisError::Invalid("rule base is empty".into()));
        }
        let mut covered = vec![false; self.outputs.len()];
        for (r, rule) in self.rules.iter().enumerate() {
            if rule.antecedents.is_empty() || rule.consequents.is_empty() {
                return Err(FisError::Invalid(format!(
                    "rule {} needs at least one antecedent and one consequent",
                    r + 1
                )));
            }
            if !(rule.weight > 0.0 && rule.weight <= 1.0) {
                return Err(FisError::InvalidParameter(format!(
                    "rule {} weight must lie in (0, 1], got {}",
                    r + 1,
                    rule.weight
                )));
            }
            for clause in &rule.antecedents {
                self.input(&clause.var)
                    .ok_or_else(|| FisError::UnknownVariable(clause.var.clone()))?
                    .mf_index(&clause.mf)?;
            }
            for (k, cons) in rule.consequents.iter().enumerate() {
                let idx = self
                    .outputs
                    .iter()
                    .position(|v| v.name == cons.var)
                    .ok_or_else(|| FisError::UnknownVariable(cons.var.clone()))?;
                self.outputs[idx].mf_index(&cons.mf)?;
                if rule.consequents[..k].iter().any(|c| c.var == cons.var) {
                    return Err(FisError::Invalid(format!(
                        "rule {} assigns output `{}` twice",
                        r + 1,
                        cons.var
                    )));
                }
                covered[idx] = true;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(FisError::Invalid(format!(
                "output `{}` is not the consequent of any rule",
                self.outputs[i].name
            )));
        }
        Ok(())
    }

    /// Emits the canonical TOML document. Floats are written in shortest
    /// round-trip form, so `parse(emit(f)) == f` bit for bit.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| FisError::Parse(e.to_string()))
    }

    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let fis: FisDefinition = toml::from_str(text).map_err(|e| FisError::Parse(e.to_string()))?;
        fis.validate()?;
        Ok(fis)
    }
}

/// Degree of one rule against named inputs, clamping each value to its
/// universe first.
pub fn rule_strength(rule: &Rule, inputs: &HashMap<String, f64>, fis: &FisDefinition) -> Result<f64> {
    let mut strength = 1.0_f64;
    for clause in &rule.antecedents {
        let var = fis
            .input(&clause.var)
            .ok_or_else(|| FisError::UnknownVariable(clause.var.clone()))?;
        let x = *inputs
            .get(&clause.var)
            .ok_or_else(|| FisError::MissingInput(clause.var.clone()))?;
        let mf = &var.mfs[var.mf_index(&clause.mf)?];
        let mu = gaussian_membership(var.clamp(x), mf)?;
        strength = strength.min(if clause.negated { 1.0 - mu } else { mu });
    }
    Ok(rule.weight * strength)
}

/// Crisp outputs plus per-output diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub values: Vec<f64>,
    /// `true` where the aggregate was identically zero and the universe
    /// midpoint was returned instead of a centroid.
    pub no_rule_fired: Vec<bool>,
}

impl Inference {
    pub fn any_unfired(&self) -> bool {
        self.no_rule_fired.iter().any(|&f| f)
    }
}

/// One-shot inference by variable name. Compiles the system on every call;
/// use [`CompiledFis`] in loops.
pub fn infer(fis: &FisDefinition, inputs: &HashMap<String, f64>) -> Result<HashMap<String, f64>> {
    let compiled = CompiledFis::new(fis)?;
    let values = fis
        .inputs
        .iter()
        .map(|v| {
            inputs
                .get(&v.name)
                .copied()
                .ok_or_else(|| FisError::MissingInput(v.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = compiled.infer(&values)?;
    Ok(fis
        .outputs
        .iter()
        .zip(out.values)
        .map(|(v, y)| (v.name.clone(), y))
        .collect())
}

#[derive(Debug, Clone)]
struct CompiledClause {
    input: usize,
    mf: usize,
    negated: bool,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    clauses: Vec<CompiledClause>,
    /// `(output index, mf index)` pairs.
    consequents: Vec<(usize, usize)>,
    weight: f64,
}

#[derive(Debug, Clone)]
struct OutputTable {
    lo: f64,
    hi: f64,
    samples: Vec<f64>,
    /// `mu[m][k]`: degree of MF `m` at sample `k`.
    mu: Vec<Vec<f64>>,
}

/// A validated fuzzy system with names resolved to indices and output
/// membership functions tabulated over the defuzzification grid.
#[derive(Debug, Clone)]
pub struct CompiledFis {
    definition: FisDefinition,
    rules: Vec<CompiledRule>,
    outputs: Vec<OutputTable>,
}

impl CompiledFis {
    pub fn new(fis: &FisDefinition) -> Result<Self> {
        fis.validate()?;
        let input_index = |name: &str| fis.inputs.iter().position(|v| v.name == name).unwrap();
        let output_index = |name: &str| fis.outputs.iter().position(|v| v.name == name).unwrap();
        let rules = fis
            .rules
            .iter()
            .map(|rule| {
                let clauses = rule
                    .antecedents
                    .iter()
                    .map(|c| {
                        let input = input_index(&c.var);
                        let mf = fis.inputs[input].mf_index(&c.mf).unwrap();
                        CompiledClause {
                            input,
                            mf,
                            negated: c.negated,
                        }
                    })
                    .collect();
                let consequents = rule
                    .consequents
                    .iter()
                    .map(|c| {
                        let out = output_index(&c.var);
                        (out, fis.outputs[out].mf_index(&c.mf).unwrap())
                    })
                    .collect();
                CompiledRule {
                    clauses,
                    consequents,
                    weight: rule.weight,
                }
            })
            .collect();
        let n = fis.defuzz_resolution;
        let outputs = fis
            .outputs
            .iter()
            .map(|var| {
                let (lo, hi) = (var.lo(), var.hi());
                let step = (hi - lo) / (n - 1) as f64;
                let samples: Vec<f64> = (0..n)
                    .map(|k| if k == n - 1 { hi } else { lo + k as f64 * step })
                    .collect();
                let mu = var
                    .mfs
                    .iter()
                    .map(|mf| samples.iter().map(|&x| mf.degree(x)).collect())
                    .collect();
                OutputTable { lo, hi, samples, mu }
            })
            .collect();
        Ok(Self {
            definition: fis.clone(),
            rules,
            outputs,
        })
    }

    pub fn definition(&self) -> &FisDefinition {
        &self.definition
    }

    /// Inference on positional inputs ordered as `definition().inputs`.
    pub fn infer(&self, inputs: &[f64]) -> Result<Inference> {
        let fis = &self.definition;
        if inputs.len() != fis.inputs.len() {
            return Err(FisError::MissingInput(format!(
                "expected {} inputs, got {}",
                fis.inputs.len(),
                inputs.len()
            )));
        }
        if let Some(i) = inputs.iter().position(|x| !x.is_finite()) {
            return Err(FisError::InvalidParameter(format!(
                "non-finite value for `{}`",
                fis.inputs[i].name
            )));
        }

        // degrees[input][mf] after clamping to the universe
        let degrees: Vec<Vec<f64>> = fis
            .inputs
            .iter()
            .zip(inputs)
            .map(|(var, &x)| {
                let x = var.clamp(x);
                var.mfs.iter().map(|mf| mf.degree(x)).collect()
            })
            .collect();

        // Rules sharing a consequent MF collapse to a single clip level:
        // max_r min(s_r, mu(x)) == min(max_r s_r, mu(x)).
        let mut clip: Vec<Vec<f64>> = fis.outputs.iter().map(|v| vec![0.0; v.mfs.len()]).collect();
        for rule in &self.rules {
            let mut s = 1.0_f64;
            for c in &rule.clauses {
                let mu = degrees[c.input][c.mf];
                s = s.min(if c.negated { 1.0 - mu } else { mu });
            }
            s *= rule.weight;
            for &(out, mf) in &rule.consequents {
                if s > clip[out][mf] {
                    clip[out][mf] = s;
                }
            }
        }

        let mut values = Vec::with_capacity(self.outputs.len());
        let mut no_rule_fired = Vec::with_capacity(self.outputs.len());
        for (table, levels) in self.outputs.iter().zip(&clip) {
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, &x) in table.samples.iter().enumerate() {
                let mut agg = 0.0_f64;
                for (m, &level) in levels.iter().enumerate() {
                    if level > 0.0 {
                        agg = agg.max(level.min(table.mu[m][k]));
                    }
                }
                num += x * agg;
                den += agg;
            }
            if den > 0.0 {
                values.push((num / den).clamp(table.lo, table.hi));
                no_rule_fired.push(false);
            } else {
                values.push(0.5 * (table.lo + table.hi));
                no_rule_fired.push(true);
            }
        }
        Ok(Inference { values, no_rule_fired })
    }
}
