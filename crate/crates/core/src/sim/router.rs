//! Shared-bandwidth router with stepped per-user tiers.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouterError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown tier `{0}`")]
    UnknownTier(String),
    #[error("total bandwidth would exceed {limit} Mbps (projected {projected} Mbps)")]
    OverLimit { projected: u32, limit: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierCheck {
    pub ok: bool,
    pub projected: u32,
    pub limit: u32,
    /// Empty when `ok`.
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterState {
    pub total_mbps: u32,
    /// Tier name to rate cap in Mbps.
    pub tiers: BTreeMap<String, u32>,
    /// User to tier name.
    pub users: BTreeMap<String, String>,
}

impl RouterState {
    pub fn rate(&self, tier: &str) -> Result<u32, RouterError> {
        self.tiers.get(tier).copied().ok_or_else(|| RouterError::UnknownTier(tier.into()))
    }

    pub fn user_tier(&self, user: &str) -> Result<&str, RouterError> {
        self.users
            .get(user)
            .map(String::as_str)
            .ok_or_else(|| RouterError::UnknownUser(user.into()))
    }

    /// Sum of the users' tier rates.
    pub fn allocated(&self) -> u32 {
        self.users.values().map(|t| self.tiers.get(t).copied().unwrap_or(0)).sum()
    }

    /// Tiers ordered by rate, slowest first.
    pub fn ladder(&self) -> Vec<(&str, u32)> {
        let mut l: Vec<(&str, u32)> = self.tiers.iter().map(|(n, r)| (n.as_str(), *r)).collect();
        l.sort_by_key(|&(n, r)| (r, n));
        l
    }

    /// The next faster tier for `user`, or `None` at the top.
    pub fn next_tier(&self, user: &str) -> Result<Option<(&str, u32)>, RouterError> {
        let current = self.rate(self.user_tier(user)?)?;
        Ok(self.ladder().into_iter().find(|&(_, r)| r > current))
    }

    pub fn check(&self, user: &str, tier: &str) -> Result<TierCheck, RouterError> {
        let current = self.rate(self.user_tier(user)?)?;
        let wanted = self.rate(tier)?;
        let projected = self.allocated() - current + wanted;
        let ok = projected <= self.total_mbps;
        let reason = if ok {
            String::new()
        } else {
            alloc::string::ToString::to_string(&RouterError::OverLimit { projected, limit: self.total_mbps })
        };
        Ok(TierCheck { ok, projected, limit: self.total_mbps, reason })
    }

    /// Atomic check-and-set: applies only if the new total fits.
    pub fn set_tier(&mut self, user: &str, tier: &str) -> Result<u32, RouterError> {
        let check = self.check(user, tier)?;
        if !check.ok {
            return Err(RouterError::OverLimit { projected: check.projected, limit: self.total_mbps });
        }
        self.users.insert(user.into(), tier.into());
        Ok(check.projected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn router() -> RouterState {
        RouterState {
            total_mbps: 100,
            tiers: [("Low", 20), ("Normal", 30), ("High", 50)].iter().map(|(n, r)| (n.to_string(), *r)).collect(),
            users: [("Eason", "Low"), ("Ada", "High"), ("Joe", "Low")]
                .iter()
                .map(|(u, t)| (u.to_string(), t.to_string()))
                .collect(),
        }
    }

    #[test]
    fn upgrade_then_rejection() {
        let mut r = router();
        assert_eq!(r.allocated(), 90);
        assert_eq!(r.next_tier("Eason").unwrap(), Some(("Normal", 30)));
        assert_eq!(r.set_tier("Eason", "Normal"), Ok(100));
        let before = r.clone();
        let err = r.set_tier("Eason", "High").unwrap_err();
        assert_eq!(err, RouterError::OverLimit { projected: 120, limit: 100 });
        assert_eq!(err.to_string(), "total bandwidth would exceed 100 Mbps (projected 120 Mbps)");
        assert_eq!(r, before);
        assert_eq!(r.set_tier("Ghost", "Low"), Err(RouterError::UnknownUser("Ghost".into())));
        assert_eq!(r.next_tier("Ada").unwrap(), None);
    }

    proptest! {
        #[test]
        fn conservation_and_atomicity(calls in proptest::collection::vec((0usize..4, 0usize..4), 0..40)) {
            let users = ["Eason", "Ada", "Joe", "Ghost"];
            let tiers = ["Low", "Normal", "High", "Turbo"];
            let mut r = router();
            for (u, t) in calls {
                let before = r.clone();
                match r.set_tier(users[u], tiers[t]) {
                    Ok(total) => prop_assert_eq!(total, r.allocated()),
                    Err(_) => prop_assert_eq!(&r, &before),
                }
                prop_assert!(r.allocated() <= r.total_mbps);
            }
        }
    }
}
