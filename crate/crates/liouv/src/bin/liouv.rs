fn main() {
    std::process::exit(liouv::cli::main_from_env());
}
