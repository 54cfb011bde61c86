//! Benchmarks for `xbatch-core`. See `benches/`.
