//! JSON encodings for shares, commitments and share-set documents.
//!
//! Field values travel as decimal strings so that 64-bit moduli survive
//! JSON readers that parse numbers as doubles.

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::field::{FieldError, Modulus};
use crate::shamir::{ShamirError, ShareCommitment, SharePoint, HASH_ALGORITHM};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed decimal value {0:?}")]
    BadDecimal(String),
    #[error("malformed digest {0:?}")]
    BadDigest(String),
    #[error("unsupported hash algorithm {0:?}")]
    UnsupportedAlgorithm(String),
    #[error("share is over p = {share} but the document says p = {document}")]
    ModulusMismatch { share: u64, document: u64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Shamir(#[from] ShamirError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A `u64` read from either a JSON string or a JSON number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecimalU64(pub u64);

impl<'de> Deserialize<'de> for DecimalU64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Ok(DecimalU64(n)),
            Raw::Str(s) => parse_decimal(&s)
                .map(DecimalU64)
                .map_err(serde::de::Error::custom),
        }
    }
}

pub fn parse_decimal(s: &str) -> Result<u64, WireError> {
    let s = s.trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(WireError::BadDecimal(s.to_string()));
    }
    s.parse().map_err(|_| WireError::BadDecimal(s.to_string()))
}

/// `{"x": "<decimal>", "y": "<decimal>", "p": "<decimal>", "epoch": n}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareJson {
    pub x: String,
    pub y: String,
    pub p: String,
    pub epoch: u64,
}

impl ShareJson {
    pub fn encode(point: &SharePoint, epoch: u64) -> Self {
        ShareJson {
            x: point.x().value().to_string(),
            y: point.y().value().to_string(),
            p: point.x().modulus().value().to_string(),
            epoch,
        }
    }

    pub fn decode(&self) -> Result<(SharePoint, u64), WireError> {
        let modulus = Modulus::new(parse_decimal(&self.p)?)?;
        let x = modulus.element(parse_decimal(&self.x)?);
        let y = modulus.element(parse_decimal(&self.y)?);
        Ok((SharePoint::new(x, y)?, self.epoch))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentJson {
    pub x: String,
    pub epoch: u64,
    pub algorithm: String,
    pub digest: String,
}

impl CommitmentJson {
    pub fn encode(c: &ShareCommitment) -> Self {
        CommitmentJson {
            x: c.x().value().to_string(),
            epoch: c.epoch(),
            algorithm: HASH_ALGORITHM.to_string(),
            digest: hex::encode(c.digest()),
        }
    }

    pub fn decode(&self, modulus: Modulus) -> Result<ShareCommitment, WireError> {
        if self.algorithm != HASH_ALGORITHM {
            return Err(WireError::UnsupportedAlgorithm(self.algorithm.clone()));
        }
        let bytes =
            hex::decode(&self.digest).map_err(|_| WireError::BadDigest(self.digest.clone()))?;
        let digest: [u8; 32] = bytes
            .try_into()
            .map_err(|_| WireError::BadDigest(self.digest.clone()))?;
        let x = modulus.element(parse_decimal(&self.x)?);
        Ok(ShareCommitment::from_parts(self.epoch, x, digest))
    }
}

/// A full share set as emitted by `deal` and consumed by the share
/// dynamics commands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareSetDoc {
    pub p: String,
    pub threshold: usize,
    pub epoch: u64,
    pub shares: Vec<ShareJson>,
    pub commitments: Vec<CommitmentJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret_commitment: Option<String>,
}

impl ShareSetDoc {
    pub fn build(
        modulus: Modulus,
        threshold: usize,
        epoch: u64,
        shares: &[SharePoint],
        commitments: &[ShareCommitment],
    ) -> Self {
        ShareSetDoc {
            p: modulus.value().to_string(),
            threshold,
            epoch,
            shares: shares.iter().map(|s| ShareJson::encode(s, epoch)).collect(),
            commitments: commitments.iter().map(CommitmentJson::encode).collect(),
            secret_commitment: None,
        }
    }

    pub fn modulus(&self) -> Result<Modulus, WireError> {
        Ok(Modulus::new(parse_decimal(&self.p)?)?)
    }

    pub fn decode_shares(&self) -> Result<Vec<SharePoint>, WireError> {
        let modulus = self.modulus()?;
        self.shares
            .iter()
            .map(|s| {
                let (point, _) = s.decode()?;
                if point.x().modulus() != modulus {
                    return Err(WireError::ModulusMismatch {
                        share: point.x().modulus().value(),
                        document: modulus.value(),
                    });
                }
                Ok(point)
            })
            .collect()
    }

    pub fn decode_commitments(&self) -> Result<Vec<ShareCommitment>, WireError> {
        let modulus = self.modulus()?;
        self.commitments.iter().map(|c| c.decode(modulus)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn share_encoding_layout() {
        let m = Modulus::new(11).unwrap();
        let point = SharePoint::new(m.element(1), m.element(8)).unwrap();
        let json = serde_json::to_string(&ShareJson::encode(&point, 3)).unwrap();
        assert_eq!(json, r#"{"x":"1","y":"8","p":"11","epoch":3}"#);
        let back: ShareJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.decode().unwrap(), (point, 3));
    }

    #[test]
    fn commitment_round_trip() {
        let m = Modulus::new(31).unwrap();
        let point = SharePoint::new(m.element(2), m.element(5)).unwrap();
        let c = ShareCommitment::commit(&point, 4);
        let json = CommitmentJson::encode(&c);
        assert_eq!(json.algorithm, "sha256");
        assert_eq!(json.digest.len(), 64);
        assert_eq!(json.decode(m).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse_decimal("-3").is_err());
        assert!(parse_decimal("0x10").is_err());
        assert!(parse_decimal("").is_err());
        let bad = ShareJson {
            x: "0".into(),
            y: "1".into(),
            p: "11".into(),
            epoch: 0,
        };
        assert!(matches!(
            bad.decode(),
            Err(WireError::Shamir(ShamirError::ZeroX))
        ));
        let composite = ShareJson {
            p: "15".into(),
            x: "1".into(),
            ..bad
        };
        assert!(matches!(
            composite.decode(),
            Err(WireError::Field(FieldError::CompositeModulus(15)))
        ));
    }

    #[test]
    fn decimal_accepts_numbers_and_strings() {
        let a: DecimalU64 = serde_json::from_str("17").unwrap();
        let b: DecimalU64 = serde_json::from_str("\"17\"").unwrap();
        assert_eq!(a, b);
        let m: Modulus = serde_json::from_str("\"2305843009213693951\"").unwrap();
        assert_eq!(m, Modulus::mersenne61());
        assert!(serde_json::from_str::<Modulus>("21").is_err());
    }
}
