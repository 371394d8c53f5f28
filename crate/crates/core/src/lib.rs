//! Exact computer algebra for derivations of additive and multiplicative type
//! in characteristic `p`, together with the gluing data of the `alpha_L`-torsors
//! built from them.
//!
//! Everything is exact residue arithmetic mod a small prime. The crate is
//! organised bottom-up:
//!
//! * [`modp`]: residues, projector polynomials, combinatorial counting oracles.
//! * [`ring`]: the closed family of ring shapes (polynomial, `t^p = c`
//!   extensions, `xy = 0` crossings, truncations, localizations) with an
//!   expression parser.
//! * [`deriv`]: derivations, p-power classification, fixed loci, Hochschild.
//! * [`quotient`]: invariants, eigenspaces, filtrations, product maps, `Dz = 1`.
//! * [`torsor`]: cocycle validation, glued derivations, dualizing data and
//!   the adjunction identities.
//! * [`blowup`]: plane vector fields and the tree of infinitely-near fixed points.
//! * [`audit`]: the full identity suite behind the `all` CLI subcommand.

pub mod audit;
pub mod blowup;
pub mod deriv;
pub mod linalg;
pub mod modp;
pub mod par;
pub mod quotient;
pub mod report;
pub mod ring;
pub mod torsor;

pub use deriv::{DerivType, Derivation};
pub use modp::PrimeChar;
pub use report::{IdentityRecord, Status};
pub use ring::{RingElem, RingSpec};
