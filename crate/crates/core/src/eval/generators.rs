//! Seeded synthetic scores and vectors.
//!
//! Distribution specs are written as `beta(a,b)`, `uniform`,
//! `mixture(w1:SPEC,w2:SPEC,...)`, `dirichlet(a1,...,ad)` and
//! `gaussian(mu,sigma,d)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal, StandardUniform};

use crate::baselines::{VectorKind, VectorSample};
use crate::error::{Error, Result};
use crate::scores::{ConfidenceFunction, ScoreSample};
use crate::stats::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreDist {
    Beta {
        a: f64,
        b: f64,
    },
    Uniform,
    /// Weighted components; weights are normalised on use.
    Mixture(Vec<(f64, ScoreDist)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorDist {
    Dirichlet { alpha: Vec<f64> },
    Gaussian { mu: f64, sigma: f64, d: usize },
}

/// Either kind of spec, as accepted on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Scores(ScoreDist),
    Vectors(VectorDist),
}

fn split_call(s: &str) -> Result<(&str, &str)> {
    let s = s.trim();
    match s.find('(') {
        None => Ok((s, "")),
        Some(i) if s.ends_with(')') => Ok((s[..i].trim(), &s[i + 1..s.len() - 1])),
        Some(_) => Err(Error::invalid(format!("malformed distribution spec `{s}`"))),
    }
}

/// Split on commas that are not nested inside parentheses.
fn split_top_level(s: &str) -> Result<Vec<&str>> {
    let (mut depth, mut start) = (0i32, 0usize);
    let mut parts = Vec::new();
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(Error::invalid(format!("unbalanced parentheses in `{s}`")));
        }
    }
    if depth != 0 {
        return Err(Error::invalid(format!("unbalanced parentheses in `{s}`")));
    }
    parts.push(&s[start..]);
    Ok(parts)
}

fn numbers(args: &str) -> Result<Vec<f64>> {
    if args.trim().is_empty() {
        return Ok(Vec::new());
    }
    args.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("not a number: `{}`", t.trim())))
        })
        .collect()
}

fn positive_finite(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(format!(
            "{what} must be positive and finite, got {x}"
        )))
    }
}

impl ScoreDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScoreDist::Beta { a, b } => {
                positive_finite(*a, "beta a")?;
                positive_finite(*b, "beta b")?;
            }
            ScoreDist::Uniform => {}
            ScoreDist::Mixture(parts) => {
                if parts.is_empty() {
                    return Err(Error::invalid("mixture needs at least one component"));
                }
                for (w, d) in parts {
                    positive_finite(*w, "mixture weight")?;
                    d.validate()?;
                }
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            ScoreDist::Beta { a, b } => beta_draw(*a, *b, rng),
            ScoreDist::Uniform => rng.sample(StandardUniform),
            ScoreDist::Mixture(parts) => {
                let total: f64 = parts.iter().map(|p| p.0).sum();
                let mut u = rng.random::<f64>() * total;
                for (w, d) in parts {
                    if u < *w {
                        return d.draw(rng);
                    }
                    u -= w;
                }
                parts.last().expect("validated nonempty").1.draw(rng)
            }
        }
    }
}

fn gamma_draw(shape: f64, rng: &mut Rng) -> f64 {
    Gamma::new(shape, 1.0).expect("validated shape").sample(rng)
}

/// `X / (X + Y)` with `X ~ Gamma(a)`, `Y ~ Gamma(b)`.
fn beta_draw(a: f64, b: f64, rng: &mut Rng) -> f64 {
    loop {
        let x = gamma_draw(a, rng);
        let y = gamma_draw(b, rng);
        if x + y > 0.0 {
            return x / (x + y);
        }
    }
}

impl FromStr for ScoreDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s)?;
        let dist = match name {
            "beta" => match numbers(args)?[..] {
                [a, b] => ScoreDist::Beta { a, b },
                _ => return Err(Error::invalid("beta takes two parameters: beta(a,b)")),
            },
            "uniform" if args.trim().is_empty() => ScoreDist::Uniform,
            "mixture" => {
                let parts = split_top_level(args)?
                    .into_iter()
                    .map(|part| {
                        let (w, d) = part.split_once(':').ok_or_else(|| {
                            Error::invalid(format!("mixture component `{part}` lacks `weight:`"))
                        })?;
                        let w = w.trim().parse::<f64>().map_err(|_| {
                            Error::invalid(format!("bad mixture weight `{}`", w.trim()))
                        })?;
                        Ok((w, d.parse::<ScoreDist>()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ScoreDist::Mixture(parts)
            }
            _ => return Err(Error::invalid(format!("unknown score distribution `{s}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl fmt::Display for ScoreDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreDist::Beta { a, b } => write!(f, "beta({a},{b})"),
            ScoreDist::Uniform => f.write_str("uniform"),
            ScoreDist::Mixture(parts) => {
                f.write_str("mixture(")?;
                for (i, (w, d)) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{w}:{d}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl VectorDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            VectorDist::Dirichlet { alpha } => {
                if alpha.len() < 2 {
                    return Err(Error::invalid(
                        "dirichlet needs at least two concentrations",
                    ));
                }
                for &a in alpha {
                    positive_finite(a, "dirichlet concentration")?;
                }
            }
            VectorDist::Gaussian { mu, sigma, d } => {
                if !mu.is_finite() {
                    return Err(Error::invalid(format!(
                        "gaussian mean must be finite, got {mu}"
                    )));
                }
                positive_finite(*sigma, "gaussian sigma")?;
                if *d == 0 {
                    return Err(Error::invalid("gaussian dimension must be >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> VectorKind {
        match self {
            VectorDist::Dirichlet { .. } => VectorKind::Softmax,
            VectorDist::Gaussian { .. } => VectorKind::Embedding,
        }
    }
}

impl FromStr for VectorDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s)?;
        let nums = numbers(args)?;
        let dist = match (name, &nums[..]) {
            ("dirichlet", _) => VectorDist::Dirichlet { alpha: nums },
            ("gaussian", &[mu, sigma, d]) => {
                if d.fract() != 0.0 || d < 1.0 {
                    return Err(Error::invalid(format!(
                        "gaussian dimension must be a positive integer, got {d}"
                    )));
                }
                VectorDist::Gaussian {
                    mu,
                    sigma,
                    d: d as usize,
                }
            }
            ("gaussian", _) => {
                return Err(Error::invalid(
                    "gaussian takes three parameters: gaussian(mu,sigma,d)",
                ))
            }
            _ => return Err(Error::invalid(format!("unknown vector distribution `{s}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl FromStr for DistSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, _) = split_call(s)?;
        match name {
            "dirichlet" | "gaussian" => s.parse().map(DistSpec::Vectors),
            _ => s.parse().map(DistSpec::Scores),
        }
    }
}

/// `n` scores labelled `raw_passthrough`.
pub fn gen_scores(dist: &ScoreDist, n: usize, rng: &mut Rng) -> Result<ScoreSample> {
    gen_scores_as(dist, n, ConfidenceFunction::RawPassthrough, rng)
}

/// As [`gen_scores`], labelled with the given confidence function.
pub fn gen_scores_as(
    dist: &ScoreDist,
    n: usize,
    kappa: ConfidenceFunction,
    rng: &mut Rng,
) -> Result<ScoreSample> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let scores = (0..n).map(|_| dist.draw(rng)).collect();
    ScoreSample::new(scores, kappa.name(), format!("simulated:{dist}"))
}

pub fn gen_vectors(dist: &VectorDist, n: usize, rng: &mut Rng) -> Result<VectorSample> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let rows = match dist {
        VectorDist::Dirichlet { alpha } => {
            let gammas: Vec<Gamma<f64>> = alpha
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("validated"))
                .collect();
            (0..n)
                .map(|_| loop {
                    let g: Vec<f64> = gammas.iter().map(|d| d.sample(rng)).collect();
                    let total: f64 = g.iter().sum();
                    if total > 0.0 {
                        break g.into_iter().map(|x| x / total).collect::<Vec<f64>>();
                    }
                })
                .collect()
        }
        VectorDist::Gaussian { mu, sigma, d } => {
            let normal = Normal::new(*mu, *sigma).expect("validated");
            (0..n)
                .map(|_| (0..*d).map(|_| normal.sample(rng)).collect())
                .collect()
        }
    };
    VectorSample::new(rows, dist.kind())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_two_sample;

    #[test]
    fn parses_specs() {
        assert_eq!(
            "beta(5,1)".parse::<ScoreDist>().unwrap(),
            ScoreDist::Beta { a: 5.0, b: 1.0 }
        );
        assert_eq!("uniform".parse::<ScoreDist>().unwrap(), ScoreDist::Uniform);
        let m: ScoreDist = "mixture(0.7:beta(5,1), 0.3:uniform)".parse().unwrap();
        assert_eq!(
            m,
            ScoreDist::Mixture(vec![
                (0.7, ScoreDist::Beta { a: 5.0, b: 1.0 }),
                (0.3, ScoreDist::Uniform)
            ])
        );
        assert_eq!(m.to_string().parse::<ScoreDist>().unwrap(), m);
        assert!(matches!(
            "dirichlet(1,1,1)".parse::<DistSpec>().unwrap(),
            DistSpec::Vectors(_)
        ));
        assert!(matches!(
            "gaussian(0,1,4)".parse::<DistSpec>().unwrap(),
            DistSpec::Vectors(_)
        ));
        for bad in [
            "beta(0,1)",
            "beta(1)",
            "gauss",
            "mixture(1:beta(1,1)",
            "gaussian(0,1,2.5)",
            "dirichlet(1)",
        ] {
            assert!(bad.parse::<DistSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn beta_one_one_is_uniform() {
        let s = gen_scores(
            &ScoreDist::Beta { a: 1.0, b: 1.0 },
            10_000,
            &mut Rng::new(1),
        )
        .unwrap();
        let mut sorted = s.scores().to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let d = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max);
        assert!(d < 0.05, "Kolmogorov distance {d}");
    }

    #[test]
    fn draws_are_reproducible() {
        let d: ScoreDist = "mixture(1:beta(2,2),1:uniform)".parse().unwrap();
        let a = gen_scores(&d, 50, &mut Rng::new(9)).unwrap();
        let b = gen_scores(&d, 50, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        let c = gen_scores(&d, 50, &mut Rng::new(10)).unwrap();
        assert_ne!(a.scores(), c.scores());
    }

    #[test]
    fn dirichlet_rows_sum_to_one() {
        let d = VectorDist::Dirichlet {
            alpha: vec![1.0, 1.0, 1.0],
        };
        let v = gen_vectors(&d, 500, &mut Rng::new(2)).unwrap();
        assert_eq!(v.kind(), VectorKind::Softmax);
        for row in v.vectors() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_mean_is_near_mu() {
        let n = 4000;
        let v = gen_vectors(
            &VectorDist::Gaussian {
                mu: 0.0,
                sigma: 2.0,
                d: 3,
            },
            n,
            &mut Rng::new(3),
        )
        .unwrap();
        for j in 0..3 {
            let mean = v.column(j).iter().sum::<f64>() / n as f64;
            assert!(
                mean.abs() < 4.0 * 2.0 / (n as f64).sqrt(),
                "dim {j}: {mean}"
            );
        }
    }

    #[test]
    fn beta_shapes_differ() {
        let mut rng = Rng::new(4);
        let a = gen_scores(&ScoreDist::Beta { a: 5.0, b: 1.0 }, 500, &mut rng).unwrap();
        let b = gen_scores(&ScoreDist::Beta { a: 2.0, b: 2.0 }, 500, &mut rng).unwrap();
        assert!(ks_two_sample(a.scores(), b.scores()).unwrap().p_value < 1e-6);
    }
}
