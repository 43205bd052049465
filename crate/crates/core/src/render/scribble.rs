use rand::Rng;

use crate::lsystem::{Symbol, SymbolString};

use super::turtle::{normalize, trace, TurtleTrajectory};

/// A random turtle walk placed in the unit frame: 4 to 24 forward steps
/// separated by runs of 0 to 2 turns of a random angle.
pub fn random_scribble<R: Rng + ?Sized>(rng: &mut R) -> TurtleTrajectory {
    let (s, angle) = random_scribble_string(rng);
    normalize(&trace(&s, angle)).expect("scribble has forward steps")
}

/// The symbol string and angle behind [`random_scribble`].
pub fn random_scribble_string<R: Rng + ?Sized>(rng: &mut R) -> (SymbolString, f64) {
    let angle = rng.random_range(15.0..120.0);
    let steps = rng.random_range(4..=24);
    let mut s = SymbolString::new();
    for i in 0..steps {
        if i > 0 {
            let turn = if rng.random::<bool>() { Symbol::Plus } else { Symbol::Minus };
            for _ in 0..rng.random_range(0..=2) {
                s.push(turn, 1.0);
            }
        }
        s.push(Symbol::F, 1.0);
    }
    (s, angle)
}
