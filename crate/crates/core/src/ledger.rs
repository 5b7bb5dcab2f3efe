/// Which reading of the published sign and frequency conventions to use.
///
/// `Resolved` is the internally consistent set: `dφ/ds = p`, `dp/ds = Δφ − m²φ`,
/// `ω = √(k² + m²)`, positive slice energy, and a Schrödinger flow
/// `ψ̂ → e^{−ik²s/2} ψ̂`. `PaperPrinted` takes the Fourier-space formulas literally
/// (`dφ̂/ds = −p̂`, `dp̂/ds = ωφ̂` with `ω = k² + m²`, slice energy with `−m²φ²`,
/// Schrödinger flow with the opposite rotation). It exists as a negative control.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum SignLedger {
    #[default]
    Resolved,
    PaperPrinted,
}

impl SignLedger {
    /// `+1` for the resolved flow direction, `−1` for the printed one.
    pub fn flow_sign(self) -> f64 {
        match self {
            SignLedger::Resolved => 1.0,
            SignLedger::PaperPrinted => -1.0,
        }
    }
}
