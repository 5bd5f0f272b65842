fn main() {
    let cli = <bell_ch::cli::Cli as clap::Parser>::parse();
    let out = bell_ch::cli::run(&cli);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    std::process::exit(out.code);
}
