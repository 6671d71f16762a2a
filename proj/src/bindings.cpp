#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ionx/config.hpp"
#include "ionx/experiments.hpp"
#include "ionx/nodal.hpp"
#include "ionx/serialize.hpp"

namespace py = pybind11;
using namespace ionx;

namespace {

// JSON crosses the boundary as text; the Python side re-parses with the
// stdlib json module instead of mirroring nlohmann types.
std::string dump_json(const nlohmann::json& j) { return j.dump(); }

nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw_usage("CONFIG_PARSE", std::string(what) + " is not valid JSON: " + e.what());
    }
}

// Numeric arguments cross as buffers and are copied into Eigen here; the
// automatic numpy-to-Eigen argument conversion crashes with this interpreter's
// numpy, while Eigen values returned to Python convert fine.
using NdArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Eigen::MatrixXd as_matrix(const NdArray& a, const char* what) {
    if (a.ndim() != 2)
        throw_usage("SHAPE_MISMATCH", std::string(what) + " must be a 2-d array");
    auto r = a.unchecked<2>();
    Eigen::MatrixXd m(r.shape(0), r.shape(1));
    for (py::ssize_t i = 0; i < r.shape(0); ++i)
        for (py::ssize_t j = 0; j < r.shape(1); ++j) m(i, j) = r(i, j);
    return m;
}

Eigen::VectorXd as_vector(const NdArray& a, const char* what) {
    if (a.ndim() != 1)
        throw_usage("SHAPE_MISMATCH", std::string(what) + " must be a 1-d array");
    auto r = a.unchecked<1>();
    Eigen::VectorXd v(r.shape(0));
    for (py::ssize_t i = 0; i < r.shape(0); ++i) v(i) = r(i);
    return v;
}

}  // namespace

PYBIND11_MODULE(_ionx, m) {
    m.doc() = "Ion-intercalation memristor and crossbar simulator core";
    m.attr("__version__") = "1.0.0";
    m.attr("ELEMENTARY_CHARGE_C") = kElementaryCharge;

    py::register_exception<Error>(m, "Error");

    py::class_<DeviceGeometry>(m, "DeviceGeometry")
        .def(py::init<>())
        .def_readwrite("d", &DeviceGeometry::d)
        .def_readwrite("l_x", &DeviceGeometry::l_x)
        .def_readwrite("l_y", &DeviceGeometry::l_y)
        .def_readwrite("l_z", &DeviceGeometry::l_z)
        .def("cross_section_area", &DeviceGeometry::cross_section_area)
        .def("validate", &DeviceGeometry::validate);

    py::class_<MaterialParams>(m, "MaterialParams")
        .def(py::init<>())
        .def_readwrite("c0", &MaterialParams::c0)
        .def_readwrite("mu_ion", &MaterialParams::mu_ion)
        .def_readwrite("mu_e", &MaterialParams::mu_e)
        .def_readwrite("g0", &MaterialParams::g0)
        .def_readwrite("q_max", &MaterialParams::q_max)
        .def_readwrite("tau_retention", &MaterialParams::tau_retention)
        .def("validate", &MaterialParams::validate);

    py::class_<DeviceParams>(m, "DeviceParams")
        .def(py::init<>())
        .def_readwrite("geometry", &DeviceParams::geometry)
        .def_readwrite("material", &DeviceParams::material)
        .def_readwrite("write_threshold", &DeviceParams::write_threshold)
        .def("validate", &DeviceParams::validate)
        .def("conductance_at", &DeviceParams::conductance_at, py::arg("q"))
        .def("resistance_at", &DeviceParams::resistance_at, py::arg("q"))
        .def("min_conductance", &DeviceParams::min_conductance)
        .def("max_conductance", &DeviceParams::max_conductance)
        .def("charge_for_conductance", &DeviceParams::charge_for_conductance,
             py::arg("g"))
        .def("to_json",
             [](const DeviceParams& p) { return dump_json(params_to_json(p)); })
        .def_static("from_json", [](const std::string& text) {
            return params_from_json(parse_json(text, "params"), DeviceParams{}, "",
                                    true);
        });

    py::class_<DeviceState>(m, "DeviceState")
        .def(py::init<>())
        .def(py::init([](double q, double t) {
                 DeviceState s;
                 s.q = q;
                 s.t = t;
                 return s;
             }),
             py::arg("q") = 0.0, py::arg("t") = 0.0)
        .def_readwrite("q", &DeviceState::q)
        .def_readwrite("t", &DeviceState::t);

    m.def("paper_calibrated", &paper_calibrated,
          "Parameters calibrated against the reference device");
    m.def("programming_current", &programming_current, py::arg("params"),
          py::arg("v_p"));
    m.def("program_step", &program_step, py::arg("state"), py::arg("params"),
          py::arg("v_p"), py::arg("dt"));
    m.def("relax_step", &relax_step, py::arg("state"), py::arg("params"),
          py::arg("dt"));
    m.def("conductance", &conductance, py::arg("state"), py::arg("params"));
    m.def("resistance", &resistance, py::arg("state"), py::arg("params"));

    py::class_<FluxModel>(m, "FluxModel")
        .def(py::init<>())
        .def_readwrite("k", &FluxModel::k)
        .def_readwrite("offset", &FluxModel::offset)
        .def_static("from_currents", &FluxModel::from_currents, py::arg("params"),
                    py::arg("i_read"), py::arg("i_prog"));
    m.def("memristance", &memristance, py::arg("q"), py::arg("model"));
    m.def("memristance_rate", &memristance_rate, py::arg("t"), py::arg("model"),
          py::arg("i_prog"));
    m.def("flux", &flux, py::arg("q1"), py::arg("q2"), py::arg("model"));

    py::enum_<TopologyKind>(m, "TopologyKind")
        .value("CONVENTIONAL_SHARED_RAIL", TopologyKind::ConventionalSharedRail)
        .value("PROPOSED_ISOLATED_LOOP", TopologyKind::ProposedIsolatedLoop);

    py::class_<Topology>(m, "Topology")
        .def(py::init([](TopologyKind kind, int rows, int cols) {
                 Topology t{kind, rows, cols};
                 t.validate();
                 return t;
             }),
             py::arg("kind"), py::arg("rows"), py::arg("cols"))
        .def_readwrite("kind", &Topology::kind)
        .def_readwrite("rows", &Topology::rows)
        .def_readwrite("cols", &Topology::cols);

    py::class_<CellIndex>(m, "CellIndex")
        .def(py::init([](int row, int col) {
                 CellIndex c;
                 c.row = row;
                 c.col = col;
                 return c;
             }),
             py::arg("row"), py::arg("col"))
        .def_readwrite("row", &CellIndex::row)
        .def_readwrite("col", &CellIndex::col)
        .def("__repr__", [](const CellIndex& c) {
            return "CellIndex(" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                   ")";
        });

    py::class_<CrossbarArray>(m, "CrossbarArray")
        .def(py::init<Topology, DeviceParams, double>(), py::arg("topology"),
             py::arg("params"), py::arg("wire_resistance") = 0.0)
        .def_property_readonly("rows", &CrossbarArray::rows)
        .def_property_readonly("cols", &CrossbarArray::cols)
        .def_property_readonly("topology", &CrossbarArray::topology)
        .def_property_readonly("params", &CrossbarArray::params)
        .def_property("wire_resistance", &CrossbarArray::wire_resistance,
                      &CrossbarArray::set_wire_resistance)
        .def("conductance_matrix", &CrossbarArray::conductance_matrix)
        .def("charge_matrix", &CrossbarArray::charge_matrix)
        .def("set_charge", &CrossbarArray::set_charge, py::arg("row"), py::arg("col"),
             py::arg("q"))
        .def("set_charges",
             [](CrossbarArray& a, const NdArray& q) { a.set_charges(as_matrix(q, "q")); },
             py::arg("q"))
        .def("cell",
             [](const CrossbarArray& a, int row, int col) { return a.cell(row, col); },
             py::arg("row"), py::arg("col"))
        .def("to_json", [](const CrossbarArray& a) { return dump_json(a.to_json()); })
        .def_static("from_json", [](const std::string& text) {
            return CrossbarArray::from_json(parse_json(text, "state"));
        });

    py::enum_<WritePolicyKind>(m, "WritePolicyKind")
        .value("SEQUENTIAL_CELLWISE", WritePolicyKind::SequentialCellwise)
        .value("ROW_PARALLEL", WritePolicyKind::RowParallel)
        .value("FULL_PARALLEL", WritePolicyKind::FullParallel)
        .value("HALF_SELECT_V2", WritePolicyKind::HalfSelectV2);

    py::class_<WritePolicy>(m, "WritePolicy")
        .def(py::init([](WritePolicyKind kind, double pulse_voltage, double pulse_dt) {
                 WritePolicy p;
                 p.kind = kind;
                 p.pulse_voltage = pulse_voltage;
                 p.pulse_dt = pulse_dt;
                 p.validate();
                 return p;
             }),
             py::arg("kind") = WritePolicyKind::SequentialCellwise,
             py::arg("pulse_voltage") = 3.6, py::arg("pulse_dt") = 600.0)
        .def_readwrite("kind", &WritePolicy::kind)
        .def_readwrite("pulse_voltage", &WritePolicy::pulse_voltage)
        .def_readwrite("pulse_dt", &WritePolicy::pulse_dt);

    py::class_<WritePlan>(m, "WritePlan")
        .def_readonly("policy", &WritePlan::policy)
        .def_readonly("rows", &WritePlan::rows)
        .def_readonly("cols", &WritePlan::cols)
        .def_property_readonly("phase_count", [](const WritePlan& p) {
            return p.phases.size();
        });

    py::class_<PhaseStats>(m, "PhaseStats")
        .def_readonly("index", &PhaseStats::index)
        .def_readonly("duration", &PhaseStats::duration)
        .def_readonly("cells_pulsed", &PhaseStats::cells_pulsed)
        .def_readonly("disturbance_l1", &PhaseStats::disturbance_l1)
        .def_readonly("disturbance_max", &PhaseStats::disturbance_max)
        .def_readonly("max_sneak_current", &PhaseStats::max_sneak_current);

    py::class_<WriteReport>(m, "WriteReport")
        .def_readonly("phases_planned", &WriteReport::phases_planned)
        .def_readonly("phases_executed", &WriteReport::phases_executed)
        .def_readonly("total_pulse_time", &WriteReport::total_pulse_time)
        .def_readonly("achieved_g", &WriteReport::achieved_g)
        .def_readonly("target_error_max_rel", &WriteReport::target_error_max_rel)
        .def_readonly("disturbance_l1_total", &WriteReport::disturbance_l1_total)
        .def_readonly("disturbance_max", &WriteReport::disturbance_max)
        .def_readonly("phases", &WriteReport::phases)
        .def("to_json", [](const WriteReport& r) { return dump_json(r.to_json()); });

    m.def("plan_writes",
          [](const NdArray& target_g, const WritePolicy& policy,
             const DeviceParams& params) {
              return plan_writes(as_matrix(target_g, "target_g"), policy, params);
          },
          py::arg("target_g"), py::arg("policy"), py::arg("params"));
    m.def("pulse_width_for_target", &pulse_width_for_target, py::arg("current_q"),
          py::arg("target_q"), py::arg("params"), py::arg("v_p"));
    m.def("execute_plan", &execute_plan, py::arg("array"), py::arg("plan"),
          py::arg("policy"));

    py::class_<Disturbance>(m, "Disturbance")
        .def_readonly("dq", &Disturbance::dq)
        .def("max_abs", &Disturbance::max_abs)
        .def("l1", &Disturbance::l1);
    m.def("write_disturbance", &write_disturbance, py::arg("before"), py::arg("after"),
          py::arg("targets"));

    py::enum_<ReadMode>(m, "ReadMode")
        .value("IDEAL", ReadMode::Ideal)
        .value("FULL_NODAL", ReadMode::FullNodal);
    m.def("read_mac",
          [](const CrossbarArray& array, const NdArray& v_rows, ReadMode mode) {
              return read_mac(array, as_vector(v_rows, "v_rows"), mode);
          },
          py::arg("array"), py::arg("v_rows"), py::arg("mode"),
          "Column currents for a row-voltage vector");

    py::class_<Trace>(m, "Trace")
        .def_property_readonly("name", &Trace::name)
        .def_property_readonly("columns", &Trace::column_names)
        .def("row_count", &Trace::row_count)
        .def("column", &Trace::column, py::arg("name"),
             py::return_value_policy::copy)
        .def("metadata_json",
             [](const Trace& t) { return dump_json(t.metadata()); })
        .def("csv", &Trace::csv_body);

    m.def("run_s1_protocol", &run_s1_protocol, py::arg("params"),
          py::arg("v_p") = 3.6, py::arg("pulse_s") = 30.0,
          py::arg("stop_rel_dr") = 1e-3, py::arg("max_cycles") = 100000);
    m.def("run_s2_protocol", &run_s2_protocol, py::arg("params"),
          py::arg("v_p") = 3.6);
    m.def("run_retention", &run_retention, py::arg("params"), py::arg("v_p") = 3.6,
          py::arg("program_s") = 300.0, py::arg("window_s") = 172800.0,
          py::arg("samples") = 240);
    m.def("run_iv_sweep", &run_iv_sweep, py::arg("params"), py::arg("amplitude") = 0.2,
          py::arg("cycles") = 2, py::arg("points_per_leg") = 25,
          py::arg("q_fractions") = std::vector<double>{0.2, 0.5, 0.8});
    m.def("run_sneak_demo", &run_sneak_demo, py::arg("size"), py::arg("seed"),
          py::arg("params"), py::arg("pulse_voltage") = 3.6,
          py::arg("pulse_dt") = 600.0);
    m.def("run_complexity_sweep", &run_complexity_sweep, py::arg("sizes"),
          py::arg("seed"), py::arg("params"), py::arg("pulse_voltage") = 3.6);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("k", &FitResult::k)
        .def_readonly("intercept", &FitResult::intercept)
        .def_readonly("r_squared", &FitResult::r_squared)
        .def_readonly("residuals", &FitResult::residuals)
        .def_readonly("degenerate", &FitResult::degenerate);
    m.def("fit_k_model",
          py::overload_cast<const std::vector<double>&, const std::vector<double>&,
                            double>(&fit_k_model),
          py::arg("q"), py::arg("r"), py::arg("g0"));
    m.def("fit_k_model",
          py::overload_cast<const Trace&, const DeviceParams&, double>(&fit_k_model),
          py::arg("trace"), py::arg("params"), py::arg("max_q_fraction") = 0.1);

    m.def("experiment_names", [] {
        std::vector<std::string> names;
        for (const auto& e : experiment_registry()) names.emplace_back(e.name);
        return names;
    });
}
