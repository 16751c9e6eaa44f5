//! Adaptive Type-II progressive hybrid censoring (AT-II PHCS).
//!
//! `n` units go on test and `m` failures are always observed. After the
//! `i`-th failure `R_i` survivors are withdrawn, but only while the failure
//! time is below the threshold `T`. Once `T` has passed, intermediate
//! removals stop and every survivor left at the `m`-th failure is withdrawn
//! there (`R*`).

use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_min_and_cause, Cause, MobwParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringPlan {
    pub n: usize,
    pub m: usize,
    pub removals: Vec<usize>,
    /// Threshold time `T`; `f64::INFINITY` gives plain progressive Type-II.
    pub threshold: f64,
}

impl CensoringPlan {
    pub fn new(n: usize, m: usize, removals: Vec<usize>, threshold: f64) -> Result<Self> {
        let plan = CensoringPlan {
            n,
            m,
            removals,
            threshold,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::InvalidPlan(format!(
                "need 1 <= m <= n, got n={}, m={}",
                self.n, self.m
            )));
        }
        if self.removals.len() != self.m {
            return Err(Error::InvalidPlan(format!(
                "removal vector has {} entries, expected m={}",
                self.removals.len(),
                self.m
            )));
        }
        let total: usize = self.removals.iter().sum();
        if total != self.n - self.m {
            return Err(Error::InvalidPlan(format!(
                "removals sum to {total}, expected n-m={}",
                self.n - self.m
            )));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidPlan(format!(
                "threshold must be > 0, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Failure counts by cause. `m3` counts masked failures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseCounts {
    pub m0: usize,
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
}

impl CauseCounts {
    pub fn m(&self) -> usize {
        self.m0 + self.m1 + self.m2 + self.m3
    }

    pub fn m012(&self) -> usize {
        self.m0 + self.m1 + self.m2
    }

    /// Counts of the identified causes in `lambda0, lambda1, lambda2` order.
    pub fn identified(&self) -> [usize; 3] {
        [self.m0, self.m1, self.m2]
    }
}

/// An observed AT-II PHCS competing-risks sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    pub n: usize,
    pub threshold: f64,
    pub times: Vec<f64>,
    pub causes: Vec<Cause>,
    /// Removals actually carried out after each failure. Zero beyond `j`
    /// in Case II; the terminal withdrawal is held in `r_star`.
    pub applied_removals: Vec<usize>,
    /// Number of failures observed before `threshold`.
    pub j: usize,
    pub r_star: usize,
    pub seed: Option<u64>,
    /// Set when input times contained ties (kept in stable order).
    pub has_ties: bool,
}

impl CensoredSample {
    /// Builds a sample from observed data and the planned removals,
    /// applying the adaptive rule at `threshold`. Times are stably sorted.
    pub fn from_plan(
        n: usize,
        threshold: f64,
        times: Vec<f64>,
        causes: Vec<Cause>,
        plan_removals: Vec<usize>,
    ) -> Result<Self> {
        let m = times.len();
        if m == 0 {
            return Err(Error::InvalidSample("empty sample".into()));
        }
        if causes.len() != m || plan_removals.len() != m {
            return Err(Error::InvalidSample(format!(
                "length mismatch: {} times, {} causes, {} removals",
                m,
                causes.len(),
                plan_removals.len()
            )));
        }
        CensoringPlan::new(n, m, plan_removals.clone(), threshold)?;
        let (times, causes, has_ties) = sort_observations(times, causes)?;
        let j = times.iter().take_while(|&&t| t < threshold).count();
        let mut applied = plan_removals;
        let r_star = if j == m {
            0
        } else {
            for r in applied.iter_mut().skip(j) {
                *r = 0;
            }
            n - m - applied.iter().sum::<usize>()
        };
        Ok(CensoredSample {
            n,
            threshold,
            times,
            causes,
            applied_removals: applied,
            j,
            r_star,
            seed: None,
            has_ties,
        })
    }

    /// Builds a sample whose removals have already been adapted. Checks
    /// every bookkeeping invariant.
    pub fn from_applied(
        n: usize,
        threshold: f64,
        times: Vec<f64>,
        causes: Vec<Cause>,
        applied_removals: Vec<usize>,
        j: usize,
        r_star: usize,
    ) -> Result<Self> {
        let m = times.len();
        if m == 0 {
            return Err(Error::InvalidSample("empty sample".into()));
        }
        if causes.len() != m || applied_removals.len() != m {
            return Err(Error::InvalidSample("column length mismatch".into()));
        }
        let (times, causes, has_ties) = sort_observations(times, causes)?;
        let s = CensoredSample {
            n,
            threshold,
            times,
            causes,
            applied_removals,
            j,
            r_star,
            seed: None,
            has_ties,
        };
        s.check_invariants()?;
        Ok(s)
    }

    pub fn m(&self) -> usize {
        self.times.len()
    }

    pub fn is_case_two(&self) -> bool {
        self.j < self.m()
    }

    pub fn check_invariants(&self) -> Result<()> {
        let m = self.m();
        let bad = |msg: String| Err(Error::InvalidSample(msg));
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return bad("times not ascending".into());
        }
        if self.j > m {
            return bad(format!("J={} exceeds m={m}", self.j));
        }
        let below = self.times.iter().take_while(|&&t| t < self.threshold).count();
        if below != self.j {
            return bad(format!("J={} but {below} failures precede T", self.j));
        }
        if self.j == m && self.r_star != 0 {
            return bad("R* must be 0 in Case I".into());
        }
        if self.applied_removals.iter().skip(self.j).any(|&r| r != 0) {
            return bad("removals after J must be zero".into());
        }
        let accounted = m + self.applied_removals.iter().sum::<usize>() + self.r_star;
        if accounted != self.n {
            return bad(format!("{accounted} units accounted for, n={}", self.n));
        }
        Ok(())
    }

    /// Weight of `y_i^alpha` in `A(alpha)`: the failure itself, its
    /// applied removals, and `R*` on the last failure.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.m();
        let mut w: Vec<f64> = self
            .applied_removals
            .iter()
            .map(|&r| 1.0 + r as f64)
            .collect();
        w[m - 1] += self.r_star as f64;
        w
    }

    pub fn counts(&self) -> CauseCounts {
        count_causes(self)
    }

    /// Writes the sample as CSV: a `# {json}` metadata line followed by
    /// `y,delta,removal` rows carrying the applied removals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header = SampleHeader {
            n: self.n,
            m: self.m(),
            threshold: finite_or_none(self.threshold),
            j: Some(self.j),
            r_star: Some(self.r_star),
            seed: self.seed,
        };
        writeln!(out, "# {}", serde_json::to_string(&header)?)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["y", "delta", "removal"])?;
        for i in 0..self.m() {
            w.write_record(&[
                self.times[i].to_string(),
                self.causes[i].code().to_string(),
                self.applied_removals[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads CSV written by [`write_csv`](Self::write_csv) or a hand-made
    /// dataset. When the metadata line lacks `J`/`Rstar`, the `removal`
    /// column is read as the planned scheme and the adaptive rule is
    /// applied. Without a metadata line, `n = m + sum(removal)` and `T = inf`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let trimmed = first.trim();
        let (header, rest): (Option<SampleHeader>, String) = if let Some(json) = trimmed.strip_prefix('#') {
            (Some(serde_json::from_str(json.trim())?), String::new())
        } else {
            (None, first.clone())
        };
        let mut body = rest;
        reader.read_to_string(&mut body)?;

        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(body.as_bytes());
        let cols = rdr.headers()?.clone();
        let idx = |name: &str| {
            cols.iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
        };
        let (iy, id, ir) = (idx("y")?, idx("delta")?, idx("removal")?);
        let mut times = Vec::new();
        let mut causes = Vec::new();
        let mut removals = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let y: f64 = field(iy)
                .parse()
                .map_err(|e| Error::Parse(format!("bad time `{}`: {e}", field(iy))))?;
            let d: u8 = field(id)
                .parse()
                .map_err(|e| Error::Parse(format!("bad cause `{}`: {e}", field(id))))?;
            let r: usize = field(ir)
                .parse()
                .map_err(|e| Error::Parse(format!("bad removal `{}`: {e}", field(ir))))?;
            times.push(y);
            causes.push(Cause::from_code(d)?);
            removals.push(r);
        }
        let m = times.len();
        match header {
            Some(h) => {
                if h.m != m {
                    return Err(Error::Parse(format!("header says m={}, found {m} rows", h.m)));
                }
                let threshold = h.threshold.unwrap_or(f64::INFINITY);
                let mut s = match (h.j, h.r_star) {
                    (Some(j), Some(r_star)) => {
                        Self::from_applied(h.n, threshold, times, causes, removals, j, r_star)?
                    }
                    _ => Self::from_plan(h.n, threshold, times, causes, removals)?,
                };
                s.seed = h.seed;
                Ok(s)
            }
            None => {
                let n = m + removals.iter().sum::<usize>();
                Self::from_plan(n, f64::INFINITY, times, causes, removals)
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleHeader {
    n: usize,
    m: usize,
    #[serde(rename = "T")]
    threshold: Option<f64>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    j: Option<usize>,
    #[serde(rename = "Rstar", default, skip_serializing_if = "Option::is_none")]
    r_star: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn sort_observations(times: Vec<f64>, causes: Vec<Cause>) -> Result<(Vec<f64>, Vec<Cause>, bool)> {
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidSample(format!("failure times must be finite and > 0, got {t}")));
    }
    let mut pairs: Vec<(f64, Cause)> = times.into_iter().zip(causes).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let has_ties = pairs.windows(2).any(|w| w[0].0 == w[1].0);
    let (t, c) = pairs.into_iter().unzip();
    Ok((t, c, has_ties))
}

/// Simulates one AT-II PHCS competing-risks sample.
///
/// Failures are produced sequentially: with `r` units at risk after the
/// previous failure time `t`, the next failure `t'` satisfies
/// `t'^alpha = t^alpha + E / (r lambda012)`, `E ~ Exp(1)`. Its cause comes
/// from an independent latent triple.
pub fn generate<R: Rng + ?Sized>(
    p: &MobwParams,
    plan: &CensoringPlan,
    rng: &mut R,
) -> Result<CensoredSample> {
    p.validate()?;
    plan.validate()?;
    let m = plan.m;
    let rate = p.lambda012();
    let inv_alpha = 1.0 / p.alpha;

    let mut at_risk = plan.n;
    let mut power = 0.0f64;
    let mut prev = 0.0f64;
    let mut times = Vec::with_capacity(m);
    let mut causes = Vec::with_capacity(m);
    let mut applied = vec![0usize; m];
    let mut j = 0;

    for i in 0..m {
        let e: f64 = Exp1.sample(rng);
        power += e / (at_risk as f64 * rate);
        let mut t = power.powf(inv_alpha);
        if t <= prev {
            t = prev.next_up();
        }
        prev = t;
        times.push(t);
        causes.push(sample_min_and_cause(p, rng).1);
        at_risk -= 1;
        if t < plan.threshold {
            let r = plan.removals[i];
            applied[i] = r;
            at_risk -= r;
            j = i + 1;
        }
    }
    let r_star = if j < m { at_risk } else { 0 };
    debug_assert!(j < m || at_risk == 0);

    Ok(CensoredSample {
        n: plan.n,
        threshold: plan.threshold,
        times,
        causes,
        applied_removals: applied,
        j,
        r_star,
        seed: None,
        has_ties: false,
    })
}

/// Replaces each cause by [`Cause::Masked`] independently with probability `q`.
pub fn mask_causes<R: Rng + ?Sized>(s: &CensoredSample, q: f64, rng: &mut R) -> Result<CensoredSample> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("masking probability must lie in [0, 1], got {q}")));
    }
    let mut out = s.clone();
    for c in out.causes.iter_mut() {
        if rng.random::<f64>() < q {
            *c = Cause::Masked;
        }
    }
    Ok(out)
}

pub fn count_causes(s: &CensoredSample) -> CauseCounts {
    let mut c = CauseCounts::default();
    for cause in &s.causes {
        match cause {
            Cause::Simultaneous => c.m0 += 1,
            Cause::First => c.m1 += 1,
            Cause::Second => c.m2 += 1,
            Cause::Masked => c.m3 += 1,
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn truth() -> MobwParams {
        MobwParams::new(1.0, 0.5, 1.0, 1.5).unwrap()
    }

    fn scheme_one(n: usize, m: usize, t: f64) -> CensoringPlan {
        let mut r = vec![0; m];
        r[m - 1] = n - m;
        CensoringPlan::new(n, m, r, t).unwrap()
    }

    #[test]
    fn plan_validation() {
        assert!(CensoringPlan::new(10, 5, vec![1, 1, 1, 1, 1], 1.0).is_ok());
        assert!(CensoringPlan::new(10, 5, vec![1, 1, 1, 1, 2], 1.0).is_err());
        assert!(CensoringPlan::new(10, 11, vec![0; 11], 1.0).is_err());
        assert!(CensoringPlan::new(10, 5, vec![5, 0, 0, 0, 0], 0.0).is_err());
    }

    #[test]
    fn infinite_threshold_is_progressive_type_two() {
        let plan = CensoringPlan::new(20, 8, vec![2, 0, 3, 0, 0, 1, 0, 6], f64::INFINITY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = generate(&truth(), &plan, &mut rng).unwrap();
            assert_eq!(s.j, 8);
            assert_eq!(s.r_star, 0);
            assert_eq!(s.applied_removals, plan.removals);
            s.check_invariants().unwrap();
        }
    }

    #[test]
    fn tiny_threshold_degenerates_to_type_two() {
        let plan = CensoringPlan::new(20, 8, vec![2, 0, 3, 0, 0, 1, 0, 6], 1e-300).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = generate(&truth(), &plan, &mut rng).unwrap();
        assert_eq!(s.j, 0);
        assert!(s.applied_removals.iter().all(|&r| r == 0));
        assert_eq!(s.r_star, 12);
        s.check_invariants().unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let plan = scheme_one(50, 30, 0.5);
        let a = generate(&truth(), &plan, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = generate(&truth(), &plan, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn masking_extremes() {
        let plan = scheme_one(30, 20, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = generate(&truth(), &plan, &mut rng).unwrap();
        assert_eq!(mask_causes(&s, 0.0, &mut rng).unwrap(), s);
        let all = mask_causes(&s, 1.0, &mut rng).unwrap();
        assert_eq!(all.counts(), CauseCounts { m0: 0, m1: 0, m2: 0, m3: 20 });
        assert_eq!(all.times, s.times);
        assert!(mask_causes(&s, 1.5, &mut rng).is_err());
    }

    #[test]
    fn from_plan_applies_adaptive_rule() {
        let times = vec![0.1, 0.2, 0.3, 0.6, 0.7];
        let causes = vec![Cause::First; 5];
        let s = CensoredSample::from_plan(10, 0.5, times, causes, vec![1, 1, 1, 1, 1]).unwrap();
        assert_eq!(s.j, 3);
        assert_eq!(s.applied_removals, vec![1, 1, 1, 0, 0]);
        assert_eq!(s.r_star, 2);
        assert_eq!(s.weights(), vec![2.0, 2.0, 2.0, 1.0, 3.0]);
    }

    #[test]
    fn ties_are_flagged_and_sorted_stably() {
        let times = vec![0.3, 0.1, 0.3];
        let causes = vec![Cause::First, Cause::Second, Cause::Simultaneous];
        let s = CensoredSample::from_plan(3, 1.0, times, causes, vec![0, 0, 0]).unwrap();
        assert!(s.has_ties);
        assert_eq!(s.causes, vec![Cause::Second, Cause::First, Cause::Simultaneous]);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let plan = scheme_one(50, 30, 0.5);
        let mut s = generate(&truth(), &plan, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        s.seed = Some(99);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = CensoredSample::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.times.iter().zip(&s.times) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn infinite_threshold_serializes_as_null() {
        let plan = CensoringPlan::new(5, 5, vec![0; 5], f64::INFINITY).unwrap();
        let s = generate(&truth(), &plan, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# {\"n\":5,\"m\":5,\"T\":null"));
        assert_eq!(CensoredSample::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn rejects_inconsistent_header() {
        let text = "# {\"n\":10,\"m\":2,\"T\":1.0,\"J\":2,\"Rstar\":3}\ny,delta,removal\n0.1,1,0\n0.2,2,0\n";
        assert!(CensoredSample::read_csv(text.as_bytes()).is_err());
    }
}
