#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "json.hpp"

#include "blast/error.hpp"
#include "blast/jobs.hpp"
#include "blast/potentials.hpp"
#include "blast/properties.hpp"
#include "blast/serialize.hpp"
#include "blast/server.hpp"
#include "blast/trainset.hpp"
#include "blast/wire.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

blast::ParameterVector params_from(const blast::ParameterSpace& space, const std::string& text) {
  const json doc = json::parse(text);
  blast::ParameterVector v{std::vector<double>(space.size())};
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& name = space.specs[i].name;
    if (!doc.contains(name)) throw blast::ValidationError("missing value", "params." + name);
    v[i] = doc[name].get<double>();
  }
  for (const auto& [name, _] : doc.items()) {
    if (!space.index_of(name)) throw blast::ValidationError("unknown parameter", "params." + name);
  }
  return v;
}

blast::Structure structure_from(const std::string& text) {
  blast::Structure s = json::parse(text).get<blast::Structure>();
  s.validate();
  return s;
}

std::string dump(const json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_blast, m) {
  m.doc() = "Interatomic potential fitting core";

  static py::exception<blast::Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<blast::ValidationError> validation(m, "ValidationError", error.ptr());
  static py::exception<blast::ParseError> parse(m, "ParseError", error.ptr());
  static py::exception<blast::ComputeError> compute(m, "ComputeError", error.ptr());
  static py::exception<blast::ProtocolError> protocol(m, "ProtocolError", error.ptr());
  static py::exception<blast::NotFound> not_found(m, "NotFound", error.ptr());
  static py::exception<blast::IllegalTransition> illegal(m, "IllegalTransition", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const blast::ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const blast::ParseError& e) {
      py::set_error(parse, e.what());
    } catch (const blast::ComputeError& e) {
      py::set_error(compute, e.what());
    } catch (const blast::ProtocolError& e) {
      py::set_error(protocol, e.what());
    } catch (const blast::NotFound& e) {
      py::set_error(not_found, e.what());
    } catch (const blast::IllegalTransition& e) {
      py::set_error(illegal, e.what());
    } catch (const blast::Error& e) {
      py::set_error(error, e.what());
    } catch (const json::exception& e) {
      py::set_error(validation, e.what());
    }
  });

  m.def("list_models", [] {
    json out = json::array();
    for (const auto& d : blast::list_models()) out.push_back(blast::model_summary(d));
    return dump(out);
  });
  m.def("model_detail", [](const std::string& id, const std::vector<std::string>& species) {
    return dump(blast::model_detail(id, species));
  });
  m.def("parameter_space", [](const std::string& id, const std::vector<std::string>& species) {
    return dump(json(blast::parameter_space(id, species)));
  });

  m.def("energy", [](const std::string& id, const std::vector<std::string>& species, const std::string& params,
                     const std::string& structure) {
    const auto space = blast::parameter_space(id, species);
    return blast::energy(space, params_from(space, params), structure_from(structure));
  });
  m.def("forces", [](const std::string& id, const std::vector<std::string>& species, const std::string& params,
                     const std::string& structure) {
    const auto space = blast::parameter_space(id, species);
    std::vector<std::array<double, 3>> out;
    for (const auto& f : blast::forces(space, params_from(space, params), structure_from(structure))) {
      out.push_back({f.x, f.y, f.z});
    }
    return out;
  });
  m.def("relax_lattice", [](const std::string& id, const std::vector<std::string>& species, const std::string& params,
                            const std::string& lattice, const std::string& element) {
    const auto space = blast::parameter_space(id, species);
    const auto v = params_from(space, params);
    const auto kind = blast::parse_lattice_kind(lattice);
    const auto r = blast::relax_lattice(space, v, kind, element, blast::default_lattice_bracket(space, v, kind, element));
    return std::make_pair(r.lattice_constant, r.energy_per_atom);
  });

  m.def("read_xyz", [](const std::string& path) { return dump(json(blast::load_structures(path))); });
  m.def("write_xyz", [](const std::string& structures) {
    std::ostringstream out;
    blast::write_xyz(out, json::parse(structures).get<std::vector<blast::Structure>>());
    return out.str();
  });
  m.def("parse_targets", [](const std::string& doc) {
    json out = json::array();
    for (const auto& t : blast::parse_targets(json::parse(doc))) out.push_back(blast::to_json(t));
    return dump(out);
  });

  m.def("frame_encode", [](const std::string& message) {
    const json msg = json::parse(message);
    blast::wire::validate_message(msg);
    return py::bytes(blast::wire::frame_encode(msg));
  });
  m.def("frame_decode", [](const py::bytes& frame) {
    const json msg = blast::wire::frame_decode(std::string(frame));
    blast::wire::validate_message(msg);
    return dump(msg);
  });

  py::class_<blast::JobService>(m, "JobService")
      .def(py::init([](const std::string& home) { return std::make_unique<blast::JobService>(home); }))
      .def("submit", [](blast::JobService& s, const std::string& doc, const std::string& base_dir) {
        return s.submit(json::parse(doc), base_dir);
      })
      .def("get", [](const blast::JobService& s, const std::string& id) { return dump(blast::to_json(s.get(id))); })
      .def("list", [](const blast::JobService& s) {
        json out = json::array();
        for (const auto& r : s.list()) out.push_back(blast::to_json(r));
        return dump(out);
      })
      .def("start", [](blast::JobService& s, const std::string& id) { return dump(blast::to_json(s.start(id))); })
      .def("cancel",
           [](blast::JobService& s, const std::string& id) {
             py::gil_scoped_release release;
             return dump(blast::to_json(s.cancel(id)));
           })
      .def("restart", [](blast::JobService& s, const std::string& id) { return dump(blast::to_json(s.restart(id))); })
      .def("wait",
           [](const blast::JobService& s, const std::string& id) {
             py::gil_scoped_release release;
             return dump(blast::to_json(s.wait(id)));
           })
      .def("result", [](const blast::JobService& s, const std::string& id) { return dump(s.result(id)); })
      .def("events", [](const blast::JobService& s, const std::string& id) {
        py::gil_scoped_release release;
        auto sub = s.subscribe(id);
        json out = json::array();
        while (!sub->closed()) {
          if (auto ev = sub->next(std::chrono::milliseconds(200))) out.push_back(*ev);
        }
        return dump(out);
      });
}
