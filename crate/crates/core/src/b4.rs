//! Belnap's four-valued lattice B4.
//!
//! A truth value records which classical outcomes have been observed so far
//! for a proposition: none (`Bot`), only false (`F`), only true (`T`), or
//! both (`Top`). The type carries two orders: the knowledge order `⊑` (set
//! inclusion of observations, queried with [`B4Value::k_leq`] and joined with
//! [`B4Value::k_join`]) and the logical order used by the connectives, where
//! `F` is bottom and `T` is top while `Bot` and `Top` sit incomparably in
//! between.

use std::fmt;

/// A Belnap truth value, encoded as the bit pair
/// `(observed-false << 1) | observed-true`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum B4Value {
    /// No information yet (`⊥`).
    Bot = 0b00,
    /// Observed true (`t`).
    T = 0b01,
    /// Observed false (`f`).
    F = 0b10,
    /// Conflicting observations (`⊤`).
    Top = 0b11,
}

/// All four values, handy for exhaustive checks.
pub const ALL: [B4Value; 4] = [B4Value::Bot, B4Value::F, B4Value::T, B4Value::Top];

// truthiness of evaluation outcomes lives next to the evaluator
pub use crate::interp::make_val;

const FROM_BITS: [B4Value; 4] = [B4Value::Bot, B4Value::T, B4Value::F, B4Value::Top];

impl B4Value {
    #[inline]
    fn bits(self) -> u8 {
        self as u8
    }

    #[inline]
    fn from_bits(b: u8) -> Self {
        FROM_BITS[(b & 0b11) as usize]
    }

    /// Truth value of a single classical observation.
    pub fn of_bool(b: bool) -> Self {
        if b {
            B4Value::T
        } else {
            B4Value::F
        }
    }

    /// Negation: swaps `T` and `F`, fixes `Bot` and `Top`.
    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Self {
        let b = self.bits();
        Self::from_bits((b >> 1) | ((b & 1) << 1))
    }

    /// Conjunction: meet in the logical order. Short-circuits, so
    /// `conj(F, Bot) = F` even though one operand is still unknown.
    pub fn conj(self, other: Self) -> Self {
        let t = (self.bits() & other.bits()) & 0b01;
        let f = (self.bits() | other.bits()) & 0b10;
        Self::from_bits(t | f)
    }

    /// Disjunction: join in the logical order. `disj(T, Bot) = T`.
    pub fn disj(self, other: Self) -> Self {
        let t = (self.bits() | other.bits()) & 0b01;
        let f = (self.bits() & other.bits()) & 0b10;
        Self::from_bits(t | f)
    }

    /// Material implication `¬a ∨ b`.
    pub fn implies(self, other: Self) -> Self {
        self.neg().disj(other)
    }

    /// Least upper bound in the knowledge order (union of observations).
    pub fn k_join(self, other: Self) -> Self {
        Self::from_bits(self.bits() | other.bits())
    }

    /// Greatest lower bound in the knowledge order.
    pub fn k_meet(self, other: Self) -> Self {
        Self::from_bits(self.bits() & other.bits())
    }

    /// Knowledge order: `a ⊑ b` iff every observation in `a` is in `b`.
    pub fn k_leq(self, other: Self) -> bool {
        self.bits() & !other.bits() == 0
    }

    /// True for the values that signal a violation at a source label,
    /// i.e. `F` and `Top`.
    pub fn blames(self) -> bool {
        self.bits() & 0b10 != 0
    }
}

impl fmt::Display for B4Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            B4Value::Bot => "bot",
            B4Value::F => "f",
            B4Value::T => "t",
            B4Value::Top => "top",
        };
        f.write_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use B4Value::*;

    #[test]
    fn neg_table() {
        assert_eq!(T.neg(), F);
        assert_eq!(F.neg(), T);
        assert_eq!(Bot.neg(), Bot);
        assert_eq!(Top.neg(), Top);
    }

    #[test]
    fn neg_is_involution() {
        for a in ALL {
            assert_eq!(a.neg().neg(), a);
        }
    }

    #[test]
    fn conj_examples() {
        // shortcut: conjunction fails while one operand is still unknown
        assert_eq!(F.conj(Bot), F);
        assert_eq!(Bot.conj(F), F);
        // t is the logical top
        for x in ALL {
            assert_eq!(T.conj(x), x);
        }
        // meet of the incomparable middle elements
        assert_eq!(Bot.conj(Top), F);
    }

    #[test]
    fn disj_examples() {
        assert_eq!(T.disj(Bot), T);
        assert_eq!(Bot.disj(T), T);
        for x in ALL {
            assert_eq!(F.disj(x), x);
        }
        assert_eq!(Bot.disj(Top), T);
    }

    #[test]
    fn implies_examples() {
        assert_eq!(F.implies(F), T);
        assert_eq!(T.implies(F), F);
        assert_eq!(Bot.implies(F), Bot);
    }

    #[test]
    fn k_join_examples() {
        assert_eq!(T.k_join(F), Top);
        for x in ALL {
            assert_eq!(Bot.k_join(x), x);
        }
        assert_eq!(T.k_join(T), T);
    }

    #[test]
    fn k_leq_examples() {
        assert!(Bot.k_leq(Top));
        assert!(!F.k_leq(T));
        assert!(F.k_leq(Top));
        for a in ALL {
            assert!(Bot.k_leq(a));
            assert!(a.k_leq(Top));
            assert!(a.k_leq(a));
        }
    }

    #[test]
    fn logical_order() {
        // a ≤ b in the logical order iff a ∧ b = a
        let leq = |a: B4Value, b: B4Value| a.conj(b) == a;
        assert!(leq(F, Bot) && leq(Bot, T));
        assert!(leq(F, Top) && leq(Top, T));
        assert!(!leq(Bot, Top) && !leq(Top, Bot));
        for a in ALL {
            assert!(leq(F, a) && leq(a, T));
        }
    }

    #[test]
    fn de_morgan() {
        for a in ALL {
            for b in ALL {
                assert_eq!(a.conj(b).neg(), a.neg().disj(b.neg()));
                assert_eq!(a.disj(b).neg(), a.neg().conj(b.neg()));
            }
        }
    }

    #[test]
    fn lattice_laws() {
        for a in ALL {
            assert_eq!(a.conj(a), a);
            assert_eq!(a.disj(a), a);
            for b in ALL {
                assert_eq!(a.conj(b), b.conj(a));
                assert_eq!(a.disj(b), b.disj(a));
                // absorption
                assert_eq!(a.conj(a.disj(b)), a);
                assert_eq!(a.disj(a.conj(b)), a);
                for c in ALL {
                    assert_eq!(a.conj(b.conj(c)), a.conj(b).conj(c));
                    assert_eq!(a.disj(b.disj(c)), a.disj(b).disj(c));
                }
            }
        }
    }

    #[test]
    fn connectives_monotone_in_knowledge_order() {
        for a in ALL {
            for a2 in ALL {
                if !a.k_leq(a2) {
                    continue;
                }
                assert!(a.neg().k_leq(a2.neg()));
                for b in ALL {
                    assert!(a.conj(b).k_leq(a2.conj(b)));
                    assert!(b.conj(a).k_leq(b.conj(a2)));
                    assert!(a.disj(b).k_leq(a2.disj(b)));
                    assert!(b.disj(a).k_leq(b.disj(a2)));
                    assert!(a.implies(b).k_leq(a2.implies(b)));
                    assert!(b.implies(a).k_leq(b.implies(a2)));
                }
            }
        }
    }

    #[test]
    fn k_join_is_least_upper_bound() {
        for a in ALL {
            for b in ALL {
                let j = a.k_join(b);
                assert!(a.k_leq(j));
                assert!(b.k_leq(j));
                for c in ALL {
                    if a.k_leq(c) && b.k_leq(c) {
                        assert!(j.k_leq(c));
                    }
                }
            }
        }
    }
}
