#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dbender/assembly_text.hpp"
#include "dbender/debugger.hpp"
#include "dbender/platform.hpp"
#include "dbender/program.hpp"

namespace py = pybind11;
using namespace dbender;

namespace {

py::bytes to_bytes(const std::vector<uint8_t>& v) { return {reinterpret_cast<const char*>(v.data()), v.size()}; }

std::vector<uint8_t> from_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

py::dict report_dict(const RunReport& r) {
  py::dict hist;
  for (int i = 0; i < kCommandClassCount; ++i) {
    hist[py::str(std::string(command_class_name(static_cast<CommandClass>(i))))] = r.histogram[i];
  }
  py::dict d;
  d["stop"] = std::string(stop_reason_name(r.stop));
  d["trap"] = r.trap_code ? py::object(py::str(std::string(error_code_name(*r.trap_code)))) : py::object(py::none());
  d["trap_message"] = r.trap_message;
  d["cycles"] = r.cycles;
  d["bus_slots"] = r.bus_slots;
  d["instructions"] = r.instructions;
  d["histogram"] = hist;
  d["violations"] = r.violations;
  d["fifo_high_water"] = r.fifo_high_water;
  d["fifo_overflows"] = r.fifo_overflows;
  d["stall_cycles"] = r.stall_cycles;
  d["transfers"] = r.transfers;
  d["injections"] = r.injections.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_dbender, m) {
  m.doc() = "Software DRAM Bender: program builder and platform";
  m.attr("__version__") = DBENDER_VERSION;

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      inst.attr("code") = std::string(error_code_name(e.code()));
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  py::class_<RegisterId>(m, "Register")
      .def("__repr__", [](RegisterId r) { return register_name(r); })
      .def("__eq__", [](RegisterId a, RegisterId b) { return a == b; });
  for (uint8_t i = 0; i <= 12; ++i) m.attr(("R" + std::to_string(i)).c_str()) = RegisterId(i);
  m.attr("BASR") = BASR;
  m.attr("RASR") = RASR;
  m.attr("CASR") = CASR;
  m.attr("WDR") = WDR;

  py::enum_<PerfCounter>(m, "PerfCounter")
      .value("Cycles", PerfCounter::Cycles)
      .value("ActsIssued", PerfCounter::ActsIssued)
      .value("ReadsIssued", PerfCounter::ReadsIssued)
      .value("WritesIssued", PerfCounter::WritesIssued)
      .value("PresIssued", PerfCounter::PresIssued)
      .value("RefsIssued", PerfCounter::RefsIssued);

  py::class_<AssembledProgram>(m, "AssembledProgram")
      .def("image", [](const AssembledProgram& a) { return to_bytes(a.image()); })
      .def("listing", &AssembledProgram::listing)
      .def("__len__", [](const AssembledProgram& a) { return a.instructions.size(); })
      .def_readonly("labels", &AssembledProgram::labels)
      .def_property_readonly("hint_counts", [](const AssembledProgram& a) {
        std::vector<uint32_t> out;
        for (const auto& h : a.hints) out.push_back(h.count);
        return out;
      });

  py::class_<Program>(m, "Program")
      .def(py::init<>())
      .def("append_ld", &Program::append_ld, py::return_value_policy::reference_internal)
      .def("append_st", &Program::append_st, py::return_value_policy::reference_internal)
      .def("append_and", &Program::append_and, py::return_value_policy::reference_internal)
      .def("append_or", &Program::append_or, py::return_value_policy::reference_internal)
      .def("append_xor", &Program::append_xor, py::return_value_policy::reference_internal)
      .def("append_add", &Program::append_add, py::return_value_policy::reference_internal)
      .def("append_sub", &Program::append_sub, py::return_value_policy::reference_internal)
      .def("append_addi", &Program::append_addi, py::return_value_policy::reference_internal)
      .def("append_mv", &Program::append_mv, py::return_value_policy::reference_internal)
      .def("append_src", &Program::append_src, py::return_value_policy::reference_internal)
      .def("append_li", &Program::append_li, py::return_value_policy::reference_internal)
      .def("append_bl", py::overload_cast<const std::string&, RegisterId, RegisterId>(&Program::append_bl),
           py::return_value_policy::reference_internal)
      .def("append_bl", py::overload_cast<RegisterId, int64_t, const std::string&>(&Program::append_bl),
           py::return_value_policy::reference_internal)
      .def("append_beq", &Program::append_beq, py::return_value_policy::reference_internal)
      .def("append_jump", &Program::append_jump, py::return_value_policy::reference_internal)
      .def("append_sleep", &Program::append_sleep, py::return_value_policy::reference_internal)
      .def("append_ldwd", &Program::append_ldwd, py::return_value_policy::reference_internal)
      .def("append_ldpc", &Program::append_ldpc, py::return_value_policy::reference_internal)
      .def("append_sre", &Program::append_sre, py::return_value_policy::reference_internal)
      .def("append_srx", &Program::append_srx, py::return_value_policy::reference_internal)
      .def("append_hint", &Program::append_hint, py::return_value_policy::reference_internal)
      .def("append_end", &Program::append_end, py::return_value_policy::reference_internal)
      .def("append_act", &Program::append_act, py::arg("bank"), py::arg("inc_bank"), py::arg("row"),
           py::arg("inc_row"), py::arg("delay") = 0, py::return_value_policy::reference_internal)
      .def("append_pre", &Program::append_pre, py::arg("bank"), py::arg("inc_bank"), py::arg("aux") = false,
           py::arg("delay") = 0, py::return_value_policy::reference_internal)
      .def("append_prea", &Program::append_prea, py::arg("delay") = 0, py::return_value_policy::reference_internal)
      .def("append_read", &Program::append_read, py::arg("bank"), py::arg("inc_bank"), py::arg("col"),
           py::arg("inc_col"), py::arg("auto_precharge") = false, py::arg("aux") = false, py::arg("delay") = 0,
           py::return_value_policy::reference_internal)
      .def("append_write", &Program::append_write, py::arg("bank"), py::arg("inc_bank"), py::arg("col"),
           py::arg("inc_col"), py::arg("auto_precharge") = false, py::arg("aux") = false, py::arg("delay") = 0,
           py::return_value_policy::reference_internal)
      .def("append_ref", &Program::append_ref, py::arg("delay") = 0, py::return_value_policy::reference_internal)
      .def("append_zqs", &Program::append_zqs, py::arg("delay") = 0, py::return_value_policy::reference_internal)
      .def("append_label", &Program::append_label, py::return_value_policy::reference_internal)
      .def("assemble", [](const Program& p) { return p.assemble(); });

  m.def("parse_assembly", [](const std::string& text) { return parse_assembly(text); });
  m.def("assemble", [](const Program& p) { return p.assemble(); });

  py::class_<Platform>(m, "Platform")
      .def_static("initialize", &Platform::initialize)
      .def("assemble", &Platform::assemble)
      .def("execute", [](Platform& pf, const Program& p) { return report_dict(pf.execute(p)); })
      .def("execute", [](Platform& pf, const py::bytes& image) { return report_dict(pf.execute(from_bytes(image))); })
      .def("set_refresh", &Platform::set_refresh)
      .def("receive_data", [](Platform& pf, size_t n) {
        py::list out;
        for (const Burst& b : pf.receive_data(n)) {
          out.append(py::bytes(reinterpret_cast<const char*>(b.data()), sizeof(Burst)));
        }
        return out;
      });

  m.def("simulate", [](const Program& p, const std::string& profile) {
    const ViolationReport r = simulate(p.assemble(), load_config(profile));
    py::dict d = report_dict(r.run);
    d["violation_csv"] = violation_report_csv(r, load_config(profile).timing);
    d["timing_violations"] = r.timing_count();
    d["state_violations"] = r.state_count();
    return d;
  });
}
