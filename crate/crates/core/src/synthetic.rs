//! Seeded corpora with Zipf-skewed word density across portions.
//!
//! Every record has the same width, so a portion size of
//! `records * record_bytes` cuts the file back into exactly the generated
//! portions. Portion ranks are a seeded permutation; a portion of rank `r`
//! puts each of `max_words` word slots to use with probability `r^-s`.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD_LEN: usize = 2;

fn default_record_bytes() -> u32 {
    128
}

fn default_max_words() -> u32 {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub zipf_s: f64,
    pub portions: u32,
    pub records: u64,
    #[serde(default = "default_record_bytes")]
    pub record_bytes: u32,
    #[serde(default = "default_max_words")]
    pub max_words: u32,
}

impl SyntheticSpec {
    pub fn new(zipf_s: f64, portions: u32, records: u64) -> Result<Self> {
        let spec = SyntheticSpec {
            zipf_s,
            portions,
            records,
            record_bytes: default_record_bytes(),
            max_words: default_max_words(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zipf_s >= 0.0 && self.zipf_s.is_finite()) {
            return Err(Error::InvalidInput(format!("zipf exponent must be >= 0, got {}", self.zipf_s)));
        }
        if self.records == 0 {
            return Err(Error::InvalidInput("synthetic portions need at least one record".into()));
        }
        let needed = self.max_words as usize * (WORD_LEN + 1) + 1;
        if (self.record_bytes as usize) < needed {
            return Err(Error::InvalidInput(format!(
                "{} words need records of at least {needed} bytes, got {}",
                self.max_words, self.record_bytes
            )));
        }
        Ok(())
    }

    pub fn portion_size_bytes(&self) -> u64 {
        self.records * u64::from(self.record_bytes)
    }

    /// Word density of each portion, in file order.
    pub fn densities(&self, seed: u64) -> Vec<f64> {
        let mut ranks: Vec<u32> = (1..=self.portions).collect();
        ranks.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        ranks.iter().map(|&r| f64::from(r).powf(-self.zipf_s)).collect()
    }

    /// Writes the corpus to `dir` and returns the file path.
    pub fn generate(&self, seed: u64, dir: &Path) -> Result<PathBuf> {
        self.validate()?;
        let path = dir.join(format!("{self}-seed{seed}.txt").replace(':', "_"));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        // word choice and counts come from a stream separate from the ranks
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_C0DE_u64);
        let width = self.record_bytes as usize;
        let mut line = Vec::with_capacity(width);
        for density in self.densities(seed) {
            let words = Binomial::new(u64::from(self.max_words), density)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            for _ in 0..self.records {
                line.clear();
                for _ in 0..words.sample(&mut rng) {
                    for _ in 0..WORD_LEN {
                        line.push(rng.gen_range(b'a'..=b'z'));
                    }
                    line.push(b' ');
                }
                line.resize(width - 1, b' ');
                line.push(b'\n');
                out.write_all(&line).map_err(|e| Error::io(&path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zipf:{}:{}:{}", self.zipf_s, self.portions, self.records)
    }
}

/// `zipf:<s>:<portions>:<records>`
impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("synthetic corpus must look like zipf:<s>:<portions>:<records>, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [kind, zipf_s, portions, records] = parts[..] else { return Err(bad()) };
        if kind != "zipf" {
            return Err(bad());
        }
        SyntheticSpec::new(
            zipf_s.parse().map_err(|_| bad())?,
            portions.parse().map_err(|_| bad())?,
            records.parse().map_err(|_| bad())?,
        )
    }
}
