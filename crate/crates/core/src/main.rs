fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KINEXUS_LOG", "warn")).init();
    std::process::exit(kinexus::cli::run(std::env::args_os()));
}
