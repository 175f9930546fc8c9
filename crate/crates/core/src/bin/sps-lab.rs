fn main() {
    let env = std::env::var_os(sps_core::cli::CONFIG_ENV).filter(|v| !v.is_empty()).map(Into::into);
    std::process::exit(sps_core::cli::run(std::env::args_os(), env));
}
