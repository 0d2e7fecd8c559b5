//! Workspace-level acceptance checks live in `tests/acceptance.rs`.
