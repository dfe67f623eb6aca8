//! Acceptance suite for the room simulator. The criteria live in
//! `tests/acceptance.rs` and run with `cargo test -p roomsim-verify --test acceptance`.
