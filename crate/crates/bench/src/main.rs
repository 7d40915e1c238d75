fn main() {
    std::process::exit(fastconv_bench::cli::main_exit_code());
}
