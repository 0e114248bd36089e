fn main() { std::process::exit(trace_cli::run(std::env::args().collect())); }
