//! Command-line flags and their translation into family instances.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::Rational64;

use kisin_core::valuation::parse_rational;
use kisin_core::{is_prime, FamilyInstance, PadicScalar};

#[derive(Debug, Parser)]
#[command(name = "kisin", version, about = "Certified descent of the Kisin modules of crystalline representations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce C_{a_p} to (P, -1; E^h, 0) and check the output contract.
    Descend(InstanceArgs),
    /// Integral descent for v_p(a_p) > floor(h/p) and h >= 2p, with reduction mod p.
    IntegralDescend(InstanceArgs),
    /// Check the monodromy relation for C_0, C_{a_p} and a seeded change of basis.
    VerifyMonodromy(InstanceArgs),
    /// Run the integral descent and print the reduced Frobenius matrix.
    ReduceModP(InstanceArgs),
    /// Print E and the products lambda, lambda_+, lambda_-, lambda_++.
    Lambda(LambdaArgs),
    /// Run a grid of instances in parallel.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Debug, Args)]
pub struct Common {
    /// Working u-adic degree D.
    #[arg(long = "deg")]
    pub deg: Option<usize>,
    /// Requested p-adic precision N.
    #[arg(long = "prec")]
    pub prec: Option<i64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub p: u64,
    /// Weight gap h = k - 1.
    #[arg(long, conflicts_with = "k", required_unless_present = "k")]
    pub h: Option<u32>,
    /// Weight k = h + 1.
    #[arg(long)]
    pub k: Option<u32>,
    /// a_p as `p^s*c`, `c*p^s`, `p^s`, an integer, or 0.
    #[arg(long)]
    pub ap: String,
    /// The rational a' as `n/d`.
    #[arg(long = "a-prime")]
    pub a_prime: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Debug, Args)]
pub struct LambdaArgs {
    #[arg(long)]
    pub p: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long = "h-min")]
    pub h_min: u32,
    #[arg(long = "h-max")]
    pub h_max: u32,
    /// Smallest v_p(a_p).
    #[arg(long = "s-min", default_value_t = 1)]
    pub s_min: i64,
    /// Largest v_p(a_p).
    #[arg(long = "s-max")]
    pub s_max: i64,
    /// Unit part c of a_p = c p^s.
    #[arg(long, default_value_t = 1)]
    pub c: i64,
    /// Run the integral descent instead of the general one.
    #[arg(long)]
    pub integral: bool,
    #[command(flatten)]
    pub common: Common,
}

/// A rejected flag value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(flag: &str, msg: impl std::fmt::Display) -> UsageError {
    UsageError(format!("invalid value for --{flag}: {msg}"))
}

pub fn check_prime(p: u64) -> Result<u64, UsageError> {
    if is_prime(p) {
        Ok(p)
    } else {
        Err(bad("p", format!("{p} is not prime")))
    }
}

/// Parses `a_p`; the result is exact and either zero or of positive valuation.
pub fn parse_ap(p: u64, text: &str) -> Result<PadicScalar, UsageError> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let int = |s: &str| s.parse::<BigInt>().map_err(|_| bad("ap", format!("cannot parse `{text}`")));
    let power = |s: &str| -> Result<i64, UsageError> {
        let e = s.strip_prefix("p^").or_else(|| (s == "p").then_some("1"));
        let e = e.ok_or_else(|| bad("ap", format!("cannot parse `{text}`")))?;
        e.parse::<i64>().map_err(|_| bad("ap", format!("bad exponent in `{text}`")))
    };
    let (s, c) = match t.split_once('*') {
        Some((l, r)) if l.starts_with('p') => (power(l)?, int(r)?),
        Some((l, r)) => (power(r)?, int(l)?),
        None if t.starts_with('p') => (power(&t)?, BigInt::from(1)),
        None => (0, int(&t)?),
    };
    if c == BigInt::from(0) {
        return Ok(PadicScalar::zero(p));
    }
    let x = PadicScalar::exact(p, s, c);
    match x.valuation() {
        Some(v) if v >= 1 => Ok(x),
        Some(v) => Err(bad("ap", format!("v_p(a_p) = {v} must be positive"))),
        None => Ok(x),
    }
}

pub fn parse_a_prime(text: &str) -> Result<Rational64, UsageError> {
    parse_rational(text).map_err(|e| bad("a-prime", e))
}

impl InstanceArgs {
    pub fn h(&self) -> Result<u32, UsageError> {
        match (self.h, self.k) {
            (Some(h), _) if h >= 1 => Ok(h),
            (Some(h), _) => Err(bad("h", format!("{h} must be at least 1"))),
            (None, Some(k)) if k >= 2 => Ok(k - 1),
            (None, Some(k)) => Err(bad("k", format!("{k} must be at least 2"))),
            (None, None) => Err(UsageError("one of --h or --k is required".into())),
        }
    }

    pub fn instance(&self) -> Result<FamilyInstance, UsageError> {
        let p = check_prime(self.p)?;
        let h = self.h()?;
        let ap = parse_ap(p, &self.ap)?;
        let mut inst = FamilyInstance::new(p, h, ap);
        if let Some(a) = &self.a_prime {
            inst = inst.with_a_prime(parse_a_prime(a)?);
        }
        apply_common(inst, &self.common)
    }
}

pub fn apply_common(mut inst: FamilyInstance, common: &Common) -> Result<FamilyInstance, UsageError> {
    if let Some(d) = common.deg {
        if d == 0 {
            return Err(bad("deg", "must be positive"));
        }
        inst = inst.with_degree(d);
    }
    if let Some(n) = common.prec {
        if n < 1 {
            return Err(bad("prec", "must be positive"));
        }
        inst = inst.with_prec(n);
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> InstanceArgs {
        let mut argv = vec!["kisin", "descend"];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Descend(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn weight_and_ap_forms() {
        let inst = parse(&["--p", "3", "--k", "8", "--ap", "p^3"]).instance().unwrap();
        assert_eq!((inst.p, inst.h), (3, 7));
        assert_eq!(inst.ap, PadicScalar::from_i64(3, 27));
        for text in ["p^2*2", "2*p^2", "18"] {
            assert_eq!(parse_ap(3, text).unwrap(), PadicScalar::from_i64(3, 18), "{text}");
        }
        assert!(parse_ap(3, "0").unwrap().is_exact_zero());
    }

    #[test]
    fn a_prime_is_rational() {
        let inst = parse(&["--p", "3", "--h", "7", "--ap", "p^3", "--a-prime", "5/2"]).instance().unwrap();
        assert_eq!(inst.a_prime(), Rational64::new(5, 2));
    }

    #[test]
    fn rejections_name_the_flag() {
        let e = parse(&["--p", "4", "--h", "7", "--ap", "p^3"]).instance().unwrap_err();
        assert!(e.0.contains("--p"), "{e}");
        let e = parse(&["--p", "3", "--h", "7", "--ap", "2"]).instance().unwrap_err();
        assert!(e.0.contains("--ap"), "{e}");
        let e = parse(&["--p", "3", "--h", "7", "--ap", "p^-1"]).instance().unwrap_err();
        assert!(e.0.contains("--ap"), "{e}");
        let e = parse(&["--p", "3", "--h", "7", "--ap", "p^2", "--a-prime", "x"]).instance().unwrap_err();
        assert!(e.0.contains("--a-prime"), "{e}");
        assert!(Cli::try_parse_from(["kisin", "descend", "--p", "3", "--h", "7", "--k", "8", "--ap", "p"]).is_err());
    }
}
