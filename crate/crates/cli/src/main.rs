use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("DDCP_LOG", "warn"))
        .format_timestamp(None)
        .init();
    std::process::exit(ddcp_cli::main_with(std::env::args_os()));
}
