//! Doc-test shim for the book: each chapter is included as module
//! documentation so `cargo test` compiles and runs every fenced Rust
//! example the guide shows.
