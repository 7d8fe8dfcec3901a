//! Seeded synthetic bug-report corpora.
//!
//! Developers are grouped into components of [`GROUP_SIZE`]. Every developer
//! writes with a private vocabulary plus the shared vocabulary of its
//! component (with its own word preferences), so developers of one component
//! are easy to confuse with each other. Most tokens come from a Zipf-shaped
//! noise vocabulary shared by everybody. A fraction of reports are
//! near-copies of an earlier report by the same developer; they are not
//! marked as duplicates.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BugReport, Status};
use crate::error::{Error, Result};

pub const GROUP_SIZE: usize = 4;
/// Zipf exponents: noise words, private words, component words.
const NOISE_EXP: f64 = 0.5;
const PRIVATE_EXP: f64 = 0.5;
const SHARED_EXP: f64 = 0.8;
/// Share of signal tokens taken from the private vocabulary.
const PRIVATE_SHARE: f64 = 0.1;
pub const FIRST_ID: u64 = 200_001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub reports: usize,
    pub developers: usize,
    /// Private words per developer; the component vocabulary is twice this size.
    pub signal_vocab: usize,
    pub noise_vocab: usize,
    /// Share of reports that are near-copies of an earlier report.
    pub duplicate_fraction: f64,
    /// Share of tokens drawn from the noise vocabulary.
    pub noise_word_fraction: f64,
    /// Every developer gets at least this many reports.
    pub min_per_developer: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            reports: 1000,
            developers: 40,
            signal_vocab: 40,
            noise_vocab: 3000,
            duplicate_fraction: 0.20,
            noise_word_fraction: 0.70,
            min_per_developer: 10,
            seed: 2012,
        }
    }
}

impl SynthConfig {
    /// Large corpus: 11 313 reports, 267 developers.
    pub fn full_scale(seed: u64) -> Self {
        SynthConfig {
            reports: 11_313,
            developers: 267,
            signal_vocab: 90,
            noise_vocab: 18_000,
            seed,
            ..SynthConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.developers == 0 || self.signal_vocab == 0 || self.noise_vocab == 0 {
            return Err(Error::Parameter(
                "developers and vocabulary sizes must be positive".into(),
            ));
        }
        if self.reports < self.developers * self.min_per_developer.max(1) {
            return Err(Error::Parameter(format!(
                "{} reports cannot give {} developers {} reports each",
                self.reports,
                self.developers,
                self.min_per_developer.max(1)
            )));
        }
        for (name, f) in [
            ("duplicate_fraction", self.duplicate_fraction),
            ("noise_word_fraction", self.noise_word_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Parameter(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Fixed-width base-26 spelling of `n`.
fn letters(mut n: usize, width: usize) -> String {
    let mut out = vec![b'a'; width];
    for slot in out.iter_mut().rev() {
        *slot = b'a' + (n % 26) as u8;
        n /= 26;
    }
    String::from_utf8(out).expect("ascii")
}

fn zipf_weights(len: usize, exponent: f64) -> Vec<f64> {
    (1..=len).map(|r| (r as f64).powf(-exponent)).collect()
}

struct DeveloperModel {
    name: String,
    private: Vec<String>,
    /// The component vocabulary in this developer's order of preference.
    shared: Vec<String>,
}

struct Generator {
    rng: ChaCha8Rng,
    config: SynthConfig,
    noise: Vec<String>,
    noise_dist: WeightedIndex<f64>,
    signal_dist: WeightedIndex<f64>,
    shared_dist: WeightedIndex<f64>,
    developers: Vec<DeveloperModel>,
}

impl Generator {
    fn new(config: SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let noise: Vec<String> = (0..config.noise_vocab)
            .map(|j| format!("n{}", letters(j, 4)))
            .collect();
        let groups = config.developers.div_ceil(GROUP_SIZE);
        let shared_len = 2 * config.signal_vocab;
        let pools: Vec<Vec<String>> = (0..groups)
            .map(|g| {
                (0..shared_len)
                    .map(|j| format!("c{}{}", letters(g, 3), letters(j, 3)))
                    .collect()
            })
            .collect();
        let developers = (0..config.developers)
            .map(|d| {
                let mut shared = pools[d / GROUP_SIZE].clone();
                shared.shuffle(&mut rng);
                DeveloperModel {
                    name: format!("dev{d:03}"),
                    private: (0..config.signal_vocab)
                        .map(|j| format!("p{}{}", letters(d, 3), letters(j, 3)))
                        .collect(),
                    shared,
                }
            })
            .collect();
        Generator {
            rng,
            noise_dist: WeightedIndex::new(zipf_weights(config.noise_vocab, NOISE_EXP))
                .expect("weights"),
            signal_dist: WeightedIndex::new(zipf_weights(config.signal_vocab, PRIVATE_EXP))
                .expect("weights"),
            shared_dist: WeightedIndex::new(zipf_weights(shared_len, SHARED_EXP)).expect("weights"),
            config,
            noise,
            developers,
        }
    }

    fn token(&mut self, dev: usize) -> String {
        if self.rng.gen_bool(self.config.noise_word_fraction) {
            return self.noise[self.noise_dist.sample(&mut self.rng)].clone();
        }
        let model = &self.developers[dev];
        if self.rng.gen_bool(PRIVATE_SHARE) {
            model.private[self.signal_dist.sample(&mut self.rng)].clone()
        } else {
            model.shared[self.shared_dist.sample(&mut self.rng)].clone()
        }
    }

    fn text(&mut self, dev: usize, len: usize) -> Vec<String> {
        (0..len).map(|_| self.token(dev)).collect()
    }

    /// Copy with roughly a fifth of the tokens redrawn.
    fn perturb(&mut self, dev: usize, words: &[String]) -> Vec<String> {
        words
            .iter()
            .map(|w| {
                if self.rng.gen_bool(0.2) {
                    self.token(dev)
                } else {
                    w.clone()
                }
            })
            .collect()
    }

    /// Report counts per developer: the minimum, plus a Zipf-weighted share of the rest.
    fn allocation(&mut self) -> Vec<usize> {
        let c = &self.config;
        let min = c.min_per_developer.max(1);
        let mut counts = vec![min; c.developers];
        let weights = WeightedIndex::new(zipf_weights(c.developers, 0.5)).expect("weights");
        for _ in 0..c.reports - min * c.developers {
            counts[weights.sample(&mut self.rng)] += 1;
        }
        counts
    }
}

/// Generates `config.reports` fixed reports with ids from [`FIRST_ID`].
pub fn generate(config: &SynthConfig) -> Result<Vec<BugReport>> {
    config.validate()?;
    let mut g = Generator::new(*config);
    let mut order: Vec<usize> = g
        .allocation()
        .into_iter()
        .enumerate()
        .flat_map(|(d, n)| std::iter::repeat_n(d, n))
        .collect();
    order.shuffle(&mut g.rng);

    // previous (summary, description) token lists per developer
    let mut history: Vec<Vec<(Vec<String>, Vec<String>)>> = vec![Vec::new(); config.developers];
    let mut reports = Vec::with_capacity(order.len());
    for (i, dev) in order.into_iter().enumerate() {
        let copy = !history[dev].is_empty() && g.rng.gen_bool(config.duplicate_fraction);
        let (summary, description) = if copy {
            let idx = g.rng.gen_range(0..history[dev].len());
            let (s, d) = history[dev][idx].clone();
            (g.perturb(dev, &s), g.perturb(dev, &d))
        } else {
            let s_len = g.rng.gen_range(4..=8);
            let d_len = g.rng.gen_range(15..=40);
            (g.text(dev, s_len), g.text(dev, d_len))
        };
        reports.push(BugReport {
            id: FIRST_ID + i as u64,
            summary: summary.join(" "),
            description: description.join(" "),
            status: Status::Fixed,
            fixer: Some(g.developers[dev].name.clone()),
            dup_of: None,
            product: Some("Synthetic".into()),
            component: Some(format!("component{:02}", dev / GROUP_SIZE)),
        });
        history[dev].push((summary, description));
    }
    Ok(reports)
}

/// One JSON object per line.
pub fn to_jsonl(reports: &[BugReport]) -> Result<String> {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
