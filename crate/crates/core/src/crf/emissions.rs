//! Emission score providers: hashed sparse features and dense-vector
//! projection.
//!
//! The feature provider extracts template strings per token, hashes each
//! once with FNV-1a, and derives a (bucket, sign) pair per tag by mixing
//! the tag index into the hash. Weights live in a fixed-size bucket array,
//! so unseen features at tag time still score (they share buckets).
//!
//! The projection provider scores each tag as an affine function of an
//! externally supplied per-token vector.

use serde::{Deserialize, Serialize};

use crate::corpus::Token;

/// Which templates the feature provider extracts. All on by default with a
/// ±2 window and 2^22 weight buckets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub buckets_log2: u8,
    pub form: bool,
    pub lowercased: bool,
    pub lemma: bool,
    pub upos: bool,
    /// 2–4 character prefixes and suffixes of the form.
    pub affixes: bool,
    /// Character-class shape with runs collapsed, e.g. "Xxx", "dd".
    pub shape: bool,
    /// Lowercased forms and UPOS at offsets -window..=window.
    pub window: u8,
}

impl Default for FeatureConfig {
    fn default() -> FeatureConfig {
        FeatureConfig {
            buckets_log2: 22,
            form: true,
            lowercased: true,
            lemma: true,
            upos: true,
            affixes: true,
            shape: true,
            window: 2,
        }
    }
}

impl FeatureConfig {
    pub fn buckets(&self) -> usize {
        1usize << self.buckets_log2
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

#[cfg(test)]
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Fold a tag index into a feature hash (FNV over its LE bytes), then
/// split into (bucket, sign).
#[inline]
fn bucket_sign(feature_hash: u64, tag: usize, buckets: usize) -> (usize, f64) {
    let mut h = feature_hash;
    for b in (tag as u64).to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
    ((h as usize) & (buckets - 1), sign)
}

fn shape_of(form: &str) -> String {
    let mut out = String::new();
    let mut last = '\0';
    for c in form.chars() {
        let cls = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if cls != last {
            out.push(cls);
            last = cls;
        }
    }
    out
}

fn push_hash(hashes: &mut Vec<u64>, parts: &[&str]) {
    let mut h = FNV_OFFSET;
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in p.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    hashes.push(h);
}

/// Extract template hashes for every token. Deterministic given the config.
pub fn featurize(tokens: &[Token], config: &FeatureConfig) -> Vec<Vec<u64>> {
    let lowers: Vec<String> = tokens.iter().map(|t| t.form.to_lowercase()).collect();
    let n = tokens.len();
    let at = |off: isize, t: usize, which: u8| -> String {
        let i = t as isize + off;
        if i < 0 {
            "<s>".into()
        } else if i >= n as isize {
            "</s>".into()
        } else if which == 0 {
            lowers[i as usize].clone()
        } else {
            tokens[i as usize].upos.clone()
        }
    };
    (0..n)
        .map(|t| {
            let tok = &tokens[t];
            let mut hashes = Vec::new();
            push_hash(&mut hashes, &["bias"]);
            if config.form {
                push_hash(&mut hashes, &["form", &tok.form]);
            }
            if config.lowercased {
                push_hash(&mut hashes, &["low", &lowers[t]]);
            }
            if config.lemma {
                push_hash(&mut hashes, &["lemma", &tok.lemma]);
            }
            if config.upos {
                push_hash(&mut hashes, &["upos", &tok.upos]);
            }
            if config.affixes {
                let chars: Vec<char> = tok.form.chars().collect();
                for len in 2..=4usize {
                    if chars.len() >= len {
                        let pre: String = chars[..len].iter().collect();
                        let suf: String = chars[chars.len() - len..].iter().collect();
                        push_hash(&mut hashes, &[&format!("pre{len}"), &pre]);
                        push_hash(&mut hashes, &[&format!("suf{len}"), &suf]);
                    }
                }
            }
            if config.shape {
                push_hash(&mut hashes, &["shape", &shape_of(&tok.form)]);
            }
            for off in 1..=config.window as isize {
                for o in [-off, off] {
                    push_hash(&mut hashes, &[&format!("low[{o}]"), &at(o, t, 0)]);
                    push_hash(&mut hashes, &[&format!("upos[{o}]"), &at(o, t, 1)]);
                }
            }
            hashes
        })
        .collect()
}

/// Per-sentence inputs in the form the emission parameters consume.
#[derive(Debug, Clone)]
pub enum PreparedInputs {
    /// One vec of feature hashes per token.
    Hashes(Vec<Vec<u64>>),
    /// One dense vector per token.
    Vectors(Vec<Vec<f64>>),
}

impl PreparedInputs {
    pub fn len(&self) -> usize {
        match self {
            PreparedInputs::Hashes(h) => h.len(),
            PreparedInputs::Vectors(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Emission scores for every (token, tag) given the emission block of the
/// parameter vector.
///
/// Feature block layout: `buckets` weights. Projection block layout: k rows
/// of d weights, then k biases.
pub fn emission_scores(
    inputs: &PreparedInputs,
    emission_params: &[f64],
    k: usize,
    config: EmissionShape,
) -> Vec<Vec<f64>> {
    match (inputs, config) {
        (PreparedInputs::Hashes(hs), EmissionShape::Feature { buckets }) => hs
            .iter()
            .map(|token| {
                (0..k)
                    .map(|tag| {
                        token
                            .iter()
                            .map(|&h| {
                                let (b, s) = bucket_sign(h, tag, buckets);
                                s * emission_params[b]
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect(),
        (PreparedInputs::Vectors(vs), EmissionShape::Projection { dim }) => {
            let bias_off = k * dim;
            vs.iter()
                .map(|x| {
                    (0..k)
                        .map(|tag| {
                            let row = &emission_params[tag * dim..(tag + 1) * dim];
                            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
                            dot + emission_params[bias_off + tag]
                        })
                        .collect()
                })
                .collect()
        }
        _ => panic!("inputs do not match the emission parameterization"),
    }
}

/// Add `coeff[t][k] * d emission(t,k) / d w` into the emission block of
/// `grad` for every parameter w.
pub fn accumulate_emission_grad(
    inputs: &PreparedInputs,
    coeff: &[Vec<f64>],
    grad: &mut [f64],
    k: usize,
    config: EmissionShape,
) {
    match (inputs, config) {
        (PreparedInputs::Hashes(hs), EmissionShape::Feature { buckets }) => {
            for (token, row) in hs.iter().zip(coeff) {
                for (tag, &c) in row.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    for &h in token {
                        let (b, s) = bucket_sign(h, tag, buckets);
                        grad[b] += c * s;
                    }
                }
            }
        }
        (PreparedInputs::Vectors(vs), EmissionShape::Projection { dim }) => {
            let bias_off = k * dim;
            for (x, row) in vs.iter().zip(coeff) {
                for (tag, &c) in row.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let wrow = &mut grad[tag * dim..(tag + 1) * dim];
                    for (g, v) in wrow.iter_mut().zip(x) {
                        *g += c * v;
                    }
                    grad[bias_off + tag] += c;
                }
            }
        }
        _ => panic!("inputs do not match the emission parameterization"),
    }
}

/// Size and kind of the emission parameter block, minus the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionShape {
    Feature { buckets: usize },
    Projection { dim: usize },
}

impl EmissionShape {
    pub fn param_len(&self, k: usize) -> usize {
        match *self {
            EmissionShape::Feature { buckets } => buckets,
            EmissionShape::Projection { dim } => dim * k + k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(forms: &[(&str, &str, &str)]) -> Vec<Token> {
        forms
            .iter()
            .enumerate()
            .map(|(i, (f, l, u))| Token::simple(i + 1, f, l, u))
            .collect()
    }

    #[test]
    fn featurization_is_deterministic_and_positional() {
        let tokens = toks(&[("The", "the", "DET"), ("dogs", "dog", "NOUN")]);
        let cfg = FeatureConfig::default();
        let a = featurize(&tokens, &cfg);
        let b = featurize(&tokens, &cfg);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        // Same form in a different neighborhood produces different windows.
        let other = toks(&[("dogs", "dog", "NOUN"), ("bark", "bark", "VERB")]);
        let c = featurize(&other, &cfg);
        assert_ne!(a[1], c[0]);
    }

    #[test]
    fn templates_can_be_disabled() {
        let tokens = toks(&[("Word", "word", "NOUN")]);
        let full = featurize(&tokens, &FeatureConfig::default());
        let slim = featurize(
            &tokens,
            &FeatureConfig {
                affixes: false,
                shape: false,
                window: 0,
                ..FeatureConfig::default()
            },
        );
        assert!(slim[0].len() < full[0].len());
        // bias + form + low + lemma + upos
        assert_eq!(slim[0].len(), 5);
    }

    #[test]
    fn shapes() {
        assert_eq!(shape_of("John"), "Xx");
        assert_eq!(shape_of("ABC"), "X");
        assert_eq!(shape_of("a1-2b"), "xd-dx");
        assert_eq!(shape_of(""), "");
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn bucket_sign_varies_by_tag_and_stays_in_range() {
        let h = fnv1a(b"low=dog");
        let buckets = 1 << 10;
        let mut seen = std::collections::HashSet::new();
        for tag in 0..50 {
            let (b, s) = bucket_sign(h, tag, buckets);
            assert!(b < buckets);
            assert!(s == 1.0 || s == -1.0);
            seen.insert((b, s as i8));
        }
        assert!(seen.len() > 40, "tag mixing too collisional: {}", seen.len());
    }

    #[test]
    fn feature_emissions_are_linear_in_weights() {
        let tokens = toks(&[("a", "a", "DET"), ("b", "b", "NOUN")]);
        let cfg = FeatureConfig { buckets_log2: 8, ..FeatureConfig::default() };
        let inputs = PreparedInputs::Hashes(featurize(&tokens, &cfg));
        let shape = EmissionShape::Feature { buckets: cfg.buckets() };
        let k = 3;
        let mut w = vec![0.0; shape.param_len(k)];
        let zero = emission_scores(&inputs, &w, k, shape);
        assert!(zero.iter().all(|r| r.iter().all(|&v| v == 0.0)));
        for (i, x) in w.iter_mut().enumerate() {
            *x = (i % 7) as f64 * 0.25 - 0.75;
        }
        let once = emission_scores(&inputs, &w, k, shape);
        let twice: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let doubled = emission_scores(&inputs, &twice, k, shape);
        for (r1, r2) in once.iter().zip(&doubled) {
            for (a, b) in r1.iter().zip(r2) {
                assert!((2.0 * a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_emissions_and_gradient() {
        let shape = EmissionShape::Projection { dim: 2 };
        let k = 2;
        // W = [[1, 0], [0, 1]], b = [0.5, -0.5]
        let params = vec![1.0, 0.0, 0.0, 1.0, 0.5, -0.5];
        let inputs = PreparedInputs::Vectors(vec![vec![3.0, 4.0]]);
        let em = emission_scores(&inputs, &params, k, shape);
        assert_eq!(em, vec![vec![3.5, 3.5]]);

        let mut grad = vec![0.0; params.len()];
        accumulate_emission_grad(&inputs, &[vec![1.0, -2.0]], &mut grad, k, shape);
        assert_eq!(grad, vec![3.0, 4.0, -6.0, -8.0, 1.0, -2.0]);
    }
}
