use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AttributePair, PrincipalId};
use crate::digest::keyed_digest;

/// An identity assertion issued by a token service. The signature is a
/// digest keyed by the issuer id; it stands in for a real signature scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Token {
    pub subject: PrincipalId,
    pub claims: BTreeSet<AttributePair>,
    pub issuer: String,
    pub expiry_tick: u64,
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("issuer `{0}` is not trusted")]
    UntrustedIssuer(String),
    #[error("token expired at tick {expiry_tick} (now {now})")]
    Expired { expiry_tick: u64, now: u64 },
    #[error("signature does not match token contents")]
    BadSignature,
    #[error("token carries no claims")]
    NoClaims,
}

impl TokenError {
    /// Short name of the failed check, as it appears in denial reasons.
    pub fn kind(&self) -> &'static str {
        match self {
            TokenError::UntrustedIssuer(_) => "UntrustedIssuer",
            TokenError::Expired { .. } => "Expired",
            TokenError::BadSignature => "BadSignature",
            TokenError::NoClaims => "NoClaims",
        }
    }
}

impl Token {
    pub fn issue(
        subject: PrincipalId,
        claims: BTreeSet<AttributePair>,
        issuer: impl Into<String>,
        expiry_tick: u64,
    ) -> Self {
        let mut token = Token {
            subject,
            claims,
            issuer: issuer.into(),
            expiry_tick,
            signature: String::new(),
        };
        token.signature = token.expected_signature();
        token
    }

    pub fn expected_signature(&self) -> String {
        let expiry = self.expiry_tick.to_be_bytes();
        let mut parts: Vec<&[u8]> = vec![self.subject.as_str().as_bytes()];
        for claim in &self.claims {
            parts.push(claim.name.as_bytes());
            parts.push(claim.value.as_bytes());
        }
        parts.push(self.issuer.as_bytes());
        parts.push(&expiry);
        keyed_digest(&self.issuer, &parts)
    }
}

/// Checks issuer trust, expiry (strict: `expiry_tick > now`) and signature,
/// in that order, and returns the claims when all pass.
pub fn verify_token(
    tok: &Token,
    trusted_issuers: &BTreeSet<String>,
    now: u64,
) -> Result<BTreeSet<AttributePair>, TokenError> {
    if !trusted_issuers.contains(&tok.issuer) {
        return Err(TokenError::UntrustedIssuer(tok.issuer.clone()));
    }
    if tok.expiry_tick <= now {
        return Err(TokenError::Expired {
            expiry_tick: tok.expiry_tick,
            now,
        });
    }
    if tok.signature != tok.expected_signature() {
        return Err(TokenError::BadSignature);
    }
    if tok.claims.is_empty() {
        return Err(TokenError::NoClaims);
    }
    Ok(tok.claims.clone())
}
