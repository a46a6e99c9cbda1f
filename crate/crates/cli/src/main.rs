fn main() {
    std::process::exit(hetcache_cli::run(std::env::args_os()));
}
