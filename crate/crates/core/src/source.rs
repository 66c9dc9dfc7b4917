//! Source families: how a single free parameter maps to click and
//! multi-photon probabilities.
//!
//! Each family implements [`SourceFamily`] and is looked up by name through a
//! [`FamilyRegistry`]. The built-in registry holds the weak coherent source
//! for BB84 and the modified coherent sources for BB84 and SARG04.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_non_negative, Error, Result};
use crate::photon_source::{
    make_state, mcs_state, p_multi, p_multi_min, p_signal, Protocol, SqueezedCoherentState,
};

/// Click and multi-photon probabilities of one source setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub p_signal: f64,
    pub p_multi: f64,
}

/// A one-parameter family of photon sources.
pub trait SourceFamily: fmt::Debug + Send + Sync {
    /// Registry key, e.g. `coherent-bb84`.
    fn name(&self) -> &'static str;

    /// Human-readable label for plots.
    fn label(&self) -> &'static str;

    /// Name of the free parameter.
    fn param_name(&self) -> &'static str;

    fn protocol(&self) -> Protocol;

    fn state(&self, param: f64) -> Result<SqueezedCoherentState>;

    /// Emission statistics behind a detector of total efficiency `eta`.
    fn emission(&self, param: f64, eta: f64) -> Result<Emission>;
}

/// Weak coherent pulses; the parameter is the mean photon number `|alpha|^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoherentBb84;

impl SourceFamily for CoherentBb84 {
    fn name(&self) -> &'static str {
        "coherent-bb84"
    }

    fn label(&self) -> &'static str {
        "(a) coherent state, BB84"
    }

    fn param_name(&self) -> &'static str {
        "alpha2"
    }

    fn protocol(&self) -> Protocol {
        Protocol::Bb84
    }

    fn state(&self, param: f64) -> Result<SqueezedCoherentState> {
        check_non_negative("alpha2", param)?;
        make_state(param.sqrt(), 0.0)
    }

    fn emission(&self, param: f64, eta: f64) -> Result<Emission> {
        let state = self.state(param)?;
        Ok(Emission {
            p_signal: p_signal(&state, eta)?,
            p_multi: p_multi(&state, Protocol::Bb84),
        })
    }
}

/// Modified coherent state tuned to `protocol`; the parameter is `nu`.
#[derive(Debug, Clone, Copy)]
pub struct ModifiedCoherent {
    protocol: Protocol,
}

impl ModifiedCoherent {
    pub fn new(protocol: Protocol) -> Self {
        ModifiedCoherent { protocol }
    }
}

impl SourceFamily for ModifiedCoherent {
    fn name(&self) -> &'static str {
        match self.protocol {
            Protocol::Bb84 => "mcs-bb84",
            Protocol::Sarg04 => "mcs-sarg04",
        }
    }

    fn label(&self) -> &'static str {
        match self.protocol {
            Protocol::Bb84 => "(b) modified coherent state, BB84",
            Protocol::Sarg04 => "(c) modified coherent state, SARG04",
        }
    }

    fn param_name(&self) -> &'static str {
        "nu"
    }

    fn protocol(&self) -> Protocol {
        self.protocol
    }

    fn state(&self, param: f64) -> Result<SqueezedCoherentState> {
        mcs_state(param, self.protocol)
    }

    fn emission(&self, param: f64, eta: f64) -> Result<Emission> {
        let state = self.state(param)?;
        Ok(Emission {
            p_signal: p_signal(&state, eta)?,
            p_multi: p_multi_min(param, self.protocol)?,
        })
    }
}

/// Name-indexed collection of source families, in registration order.
#[derive(Debug, Clone, Default)]
pub struct FamilyRegistry {
    families: Vec<Arc<dyn SourceFamily>>,
}

impl FamilyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Coherent BB84, modified BB84, modified SARG04.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.register(Arc::new(CoherentBb84));
        reg.register(Arc::new(ModifiedCoherent::new(Protocol::Bb84)));
        reg.register(Arc::new(ModifiedCoherent::new(Protocol::Sarg04)));
        reg
    }

    /// Adds `family`, replacing any entry with the same name.
    pub fn register(&mut self, family: Arc<dyn SourceFamily>) {
        match self.families.iter_mut().find(|f| f.name() == family.name()) {
            Some(slot) => *slot = family,
            None => self.families.push(family),
        }
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SourceFamily>> {
        self.families
            .iter()
            .find(|f| f.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownFamily(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.families.iter().map(|f| f.name())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn SourceFamily>> {
        self.families.iter()
    }

    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }
}
