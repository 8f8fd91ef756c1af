fn main() {
    std::process::exit(chirp_collide::cli::main_exit_code());
}
