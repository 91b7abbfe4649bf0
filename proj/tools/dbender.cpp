// dbender: assemble, run, debug and study programs on the emulated board.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dbender/assembly_text.hpp"
#include "dbender/debugger.hpp"
#include "dbender/error.hpp"
#include "dbender/experiments.hpp"
#include "dbender/platform.hpp"

using namespace dbender;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& data) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << data;
}

bool is_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  return in && std::string_view(magic, 8) == kImageMagic;
}

// .dbasm text or a binary image.
AssembledProgram load_program(const std::string& path, const Platform& platform) {
  if (is_image(path)) {
    AssembledProgram p;
    p.instructions = read_image(read_bytes(path));
    return p;
  }
  return platform.assemble(parse_assembly(read_text(path)));
}

void print_report(const RunReport& r, std::ostream& os) {
  os << "stop: " << stop_reason_name(r.stop);
  if (r.trap_code) os << " (" << error_code_name(*r.trap_code) << ": " << r.trap_message << ")";
  os << "\ncycles: " << r.cycles << "\ninstructions: " << r.instructions << "\ncommands:";
  for (int i = 0; i < kCommandClassCount; ++i) {
    os << ' ' << command_class_name(static_cast<CommandClass>(i)) << '=' << r.histogram[i];
  }
  os << "\nviolations: " << r.violations << "\ntransfers: " << r.transfers << "\nfifo high water: "
     << r.fifo_high_water << "\nstall cycles: " << r.stall_cycles << "\ninjections: " << r.injections.size() << '\n';
}

std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dbender: DRAM testing infrastructure emulator"};
  app.require_subcommand(1);

  std::string input, output, profile = "ddr4_default", trace_path, violations_path, vcd_path, out_dir = "results";
  uint64_t max_cycles = kDefaultMaxCycles, seed = 1;
  bool refresh = false, full_bank = false;

  auto* asm_cmd = app.add_subcommand("asm", "Assemble .dbasm text into an image");
  asm_cmd->add_option("input", input)->required();
  asm_cmd->add_option("-o,--output", output)->required();
  asm_cmd->add_option("--profile", profile);
  bool listing = false;
  asm_cmd->add_flag("--listing", listing, "Print the assembled listing");

  auto* disasm_cmd = app.add_subcommand("disasm", "Disassemble an image");
  disasm_cmd->add_option("input", input)->required();

  auto* run_cmd = app.add_subcommand("run", "Execute a program");
  run_cmd->add_option("input", input)->required();
  run_cmd->add_option("--profile", profile);
  run_cmd->add_option("--trace", trace_path, "Write the command trace");
  run_cmd->add_option("--violations", violations_path, "Write the violation report CSV");
  run_cmd->add_option("--max-cycles", max_cycles);
  run_cmd->add_flag("--refresh", refresh, "Enable periodic refresh");

  auto* debug_cmd = app.add_subcommand("debug", "Interactive debugger");
  debug_cmd->add_option("input", input)->required();
  debug_cmd->add_option("--profile", profile);
  debug_cmd->add_option("--vcd", vcd_path);

  auto study = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--profile", profile)->required();
    s->add_option("--seed", seed);
    s->add_option("--out", out_dir);
    return s;
  };
  auto* s1 = study("study1", "Aggressor interleaving sweep");
  s1->add_flag("--full-bank", full_bank, "Test every triple in the bank");
  auto* s2 = study("study2", "Data pattern dependence");
  auto* s3 = study("study3", "In-DRAM majority timing sweep");

  auto* cal_cmd = app.add_subcommand("calibrate", "Fit a manufacturer profile to its endpoint targets");
  std::string base = "ddr4_default", target_id;
  cal_cmd->add_option("--base", base);
  cal_cmd->add_option("--targets", target_id, "mfrA, mfrB or mfrC")->required();
  cal_cmd->add_option("-o,--output", output)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*asm_cmd) {
      Platform platform(load_config(profile));
      const auto program = platform.assemble(parse_assembly(read_text(input)));
      const auto image = program.image();
      write_file(output, std::string(image.begin(), image.end()));
      if (listing) std::cout << program.listing();
      std::cout << program.instructions.size() << " instructions\n";
    } else if (*disasm_cmd) {
      std::cout << disassemble_program(read_image(read_bytes(input)));
    } else if (*run_cmd) {
      Platform platform(load_config(profile));
      platform.set_refresh(refresh);
      std::ofstream trace_out;
      if (!trace_path.empty()) {
        trace_out.open(trace_path);
        if (!trace_out) fail(ErrorCode::IoError, "cannot write " + trace_path);
        platform.set_trace([&](const IssuedCommand& c) { trace_out << trace_csv_line(c) << '\n'; });
      }
      const auto program = load_program(input, platform);
      const RunReport r = platform.execute(program, max_cycles);
      print_report(r, std::cout);
      if (!violations_path.empty()) {
        ViolationReport vr{platform.device().violations(), r};
        write_file(violations_path, violation_report_csv(vr, platform.config().timing));
      }
      return r.stop == StopReason::End ? 0 : 2;
    } else if (*debug_cmd) {
      const PlatformConfig cfg = load_config(profile);
      Platform scratch(cfg);
      DebugSession session(cfg, load_program(input, scratch));
      std::ofstream vcd;
      if (!vcd_path.empty()) {
        vcd.open(vcd_path);
        if (!vcd) fail(ErrorCode::IoError, "cannot write " + vcd_path);
        session.attach_vcd(vcd);
      }
      run_repl(session, std::cin, std::cout);
      if (vcd.is_open()) session.finish_vcd();
    } else if (*s1) {
      Study1Config c;
      c.seed = seed;
      c.full_bank = full_bank;
      const auto r = run_study1(load_config(profile), c);
      write_file(out_path(out_dir, "study1_" + r.profile + ".csv"), r.csv());
      std::cout << r.summary();
    } else if (*s2) {
      Study2Config c;
      c.seed = seed;
      const auto r = run_study2(load_config(profile), c);
      write_file(out_path(out_dir, "study2_" + r.profile + "_seed" + std::to_string(seed) + ".csv"), r.csv());
      std::cout << r.summary();
    } else if (*s3) {
      Study3Config c;
      c.seed = seed;
      const auto r = run_study3(load_config(profile), c);
      write_file(out_path(out_dir, "study3_" + r.profile + ".csv"), r.csv());
      std::cout << r.summary();
    } else if (*cal_cmd) {
      PlatformConfig cfg = load_config(base);
      cfg.name = target_id;
      CalibrationOptions options;
      options.progress = [](const std::string& line) { std::cerr << line << std::endl; };
      const auto report = calibrate(cfg, default_targets(target_id), options);
      write_file(output, config_to_json(report.config));
      std::cout << "wrote " << output << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
