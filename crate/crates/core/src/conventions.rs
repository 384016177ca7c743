//! Index layouts and sign conventions used throughout the crate.
//!
//! * Christoffel symbols `Γ^k_{ij}` are stored `[k][i][j]`, so that
//!   `∇_{∂_i}∂_j = Γ^k_{ij}∂_k`.
//! * Curvature is `R(X,Y) = ∇_{[X,Y]} − [∇_X, ∇_Y]`, the negative of the more
//!   common convention. Components `R^l_{kij}` are stored `[l][k][i][j]` with
//!   `R(∂_i,∂_j)∂_k = R^l_{kij}∂_l`.
//! * Derivative slots are prepended: a first jet of a field with shape `s` has
//!   shape `[d] ++ s`, and `∇R` is `[m][l][k][i][j]`.
//! * End-valued 2-forms such as `R̂`, `Φ̂`, `Ψ̂` are lists of `n·n` matrices in
//!   row-major `(i, j)` order.
//! * Bundle connection coefficients: `∇̂_{∂_i} e_b = (A_i)_{ab} e_a`. On `TB`,
//!   `(A_i)_{ab} = Γ^a_{ib}`; on `T*B`, `(A_i)_{ab} = −Γ^b_{ia}`.
//! * Coordinates on the total space are `(x¹..xⁿ, ξ₁..ξₙ)`. Horizontal lifts
//!   are `H_i = ∂_i − (A_iξ)_a ∂/∂ξ_a`; a [`crate::lifted::FramedVector`]
//!   stores the `H` and `∂/∂ξ` components separately.
//! * Holonomy matrices act on `T_pM` in the ordered basis
//!   `(∂/∂ξ_1..∂/∂ξ_n, H_1..H_n)`: vertical block first.
