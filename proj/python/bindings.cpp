#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "amrl/config.hpp"
#include "amrl/harness.hpp"
#include "amrl/svg.hpp"
#include "amrl/toolpath.hpp"

namespace py = pybind11;
using namespace amrl;

namespace {

py::array_t<float> image_array(const Observation& obs) {
  py::array_t<float> out({obs.channels, obs.height, obs.width});
  std::copy(obs.image.begin(), obs.image.end(), out.mutable_data());
  return out;
}

py::array_t<float> history_array(const Observation& obs) {
  py::array_t<float> out({kHistoryLength, kNumActions});
  std::copy(obs.history.begin(), obs.history.end(), out.mutable_data());
  return out;
}

std::vector<Action> to_actions(const std::vector<int>& indices) {
  std::vector<Action> out;
  out.reserve(indices.size());
  for (const int i : indices) out.push_back(Action::from_index(i));
  return out;
}

std::vector<int> to_indices(const std::vector<Action>& actions) {
  std::vector<int> out;
  out.reserve(actions.size());
  for (const auto& a : actions) out.push_back(a.index());
  return out;
}

py::dict row_dict(const EvalRow& r) {
  py::dict d;
  d["env_steps"] = r.env_steps;
  d["episodes"] = r.episodes;
  d["mean_score"] = r.mean_score;
  d["score_std"] = r.score_std;
  d["mean_ep_len"] = r.mean_ep_len;
  d["wall_clock_s"] = r.wall_clock_s;
  return d;
}

// Python-side environment: owns its section and a seeded generator for
// random start cells.
class PyEnv {
 public:
  PyEnv(const EnvConfig& config, std::uint64_t seed) : env_(config), rng_(seed) {}

  py::tuple reset(const Section& section, std::optional<std::pair<int, int>> start) {
    auto s = std::make_shared<const Section>(section);
    if (start) {
      env_.reset_at(std::move(s), Cell{start->first, start->second});
    } else {
      env_.reset(std::move(s), rng_);
    }
    return observation();
  }

  py::tuple step(int action) {
    const auto out = env_.step(action);
    py::dict info;
    info["kind"] = static_cast<int>(out.kind);
    info["blocked"] = out.blocked;
    info["reward_dense"] = out.reward_dense;
    info["done_reason"] = static_cast<int>(out.done_reason);
    return py::make_tuple(observation(), out.reward, out.done, info);
  }

  py::tuple observation() const {
    const auto obs = env_.observe();
    return py::make_tuple(image_array(obs), history_array(obs));
  }

  std::pair<int, int> nozzle() const { return {env_.state().nozzle.row, env_.state().nozzle.col}; }
  int step_count() const { return env_.state().step_count; }
  py::array_t<std::uint8_t> filled() const {
    const auto& st = env_.state();
    py::array_t<std::uint8_t> out({st.section->height(), st.section->width()});
    std::copy(st.filled.begin(), st.filled.end(), out.mutable_data());
    return out;
  }
  std::vector<int> actions() const { return to_indices(env_.state().action_history); }

 private:
  GridEnv env_;
  Rng rng_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Grid-world toolpath environment and reinforcement learning agents";

  m.attr("NUM_ACTIONS") = kNumActions;
  m.attr("HISTORY_LENGTH") = kHistoryLength;

  py::enum_<RewardMode>(m, "RewardMode")
      .value("DENSE", RewardMode::Dense)
      .value("SPARSE", RewardMode::Sparse);

  py::class_<Section>(m, "Section")
      .def(py::init([](const std::string& text, std::string name) {
             return parse_section(text, std::move(name));
           }),
           py::arg("text"), py::arg("name") = "")
      .def_static("load", &load_section, py::arg("path"))
      .def_static("generate",
                  [](std::uint64_t seed, int grid_size) {
                    Rng rng(seed);
                    GeneratorParams p;
                    p.grid_size = grid_size;
                    return generate_section(rng, p);
                  },
                  py::arg("seed"), py::arg("grid_size") = 32)
      .def_property_readonly("width", &Section::width)
      .def_property_readonly("height", &Section::height)
      .def_property_readonly("name", &Section::name)
      .def_property_readonly("desired_count", &Section::desired_count)
      .def("mask",
           [](const Section& s) {
             py::array_t<std::uint8_t> out({s.height(), s.width()});
             std::copy(s.mask().begin(), s.mask().end(), out.mutable_data());
             return out;
           })
      .def("serialize", &serialize_section)
      .def("__repr__", [](const Section& s) {
        return "<Section " + s.name() + " " + std::to_string(s.width()) + "x" +
               std::to_string(s.height()) + ">";
      });

  py::class_<PyEnv>(m, "GridEnv")
      .def(py::init([](int horizon, RewardMode mode, bool nozzle_channel, std::uint64_t seed) {
             EnvConfig c;
             c.horizon = horizon;
             c.reward_mode = mode;
             c.observation.nozzle_channel = nozzle_channel;
             return PyEnv(c, seed);
           }),
           py::arg("horizon") = 400, py::arg("reward_mode") = RewardMode::Dense,
           py::arg("nozzle_channel") = false, py::arg("seed") = 0)
      .def("reset", &PyEnv::reset, py::arg("section"), py::arg("start") = py::none(),
           "Returns (image, history); a random start cell when start is None.")
      .def("step", &PyEnv::step, py::arg("action"),
           "Returns ((image, history), reward, done, info).")
      .def("observation", &PyEnv::observation)
      .def_property_readonly("nozzle", &PyEnv::nozzle)
      .def_property_readonly("step_count", &PyEnv::step_count)
      .def_property_readonly("actions", &PyEnv::actions)
      .def("filled", &PyEnv::filled);

  m.def("pattern_score",
        [](const std::vector<int>& actions) { return pattern_score(to_actions(actions)); },
        py::arg("actions"));

  m.def("zigzag_plan",
        [](const Section& s, std::pair<int, int> start) {
          return to_indices(zigzag_policy(s, Cell{start.first, start.second}));
        },
        py::arg("section"), py::arg("start"));

  m.def("export_toolpath",
        [](const Section& s, std::pair<int, int> start, const std::vector<int>& actions) {
          const auto sp = std::make_shared<const Section>(s);
          const auto a = to_actions(actions);
          return export_toolpath(record_toolpath(sp, Cell{start.first, start.second}, a));
        },
        py::arg("section"), py::arg("start"), py::arg("actions"));

  m.def("render_toolpath_svg",
        [](const Section& s, std::pair<int, int> start, const std::vector<int>& actions) {
          const auto sp = std::make_shared<const Section>(s);
          const auto a = to_actions(actions);
          return render_toolpath_svg(record_toolpath(sp, Cell{start.first, start.second}, a), s);
        },
        py::arg("section"), py::arg("start"), py::arg("actions"));

  m.def("default_config", [] { return serialize_config(TrainConfig{}); },
        "Every configuration key with its default, as config text.");
  m.def("normalize_config", [](const std::string& text) {
    return serialize_config(parse_config(text));
  });
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); });

  m.def("evaluate_baseline",
        [](const std::string& config_text, const std::string& which, int episodes,
           std::uint64_t seed) {
          const auto config = parse_config(config_text);
          const auto data = load_datasets(config);
          std::unique_ptr<Policy> policy;
          if (which == "zigzag") {
            policy = std::make_unique<ZigzagPolicy>();
          } else if (which == "random") {
            policy = std::make_unique<RandomPolicy>(seed);
          } else {
            throw std::invalid_argument("baseline must be 'zigzag' or 'random'");
          }
          Rng rng(seed);
          const auto r = evaluate(*policy, data.eval, config.env_config(), episodes, rng);
          py::dict d;
          d["mean_score"] = r.mean_score;
          d["score_std"] = r.score_std;
          d["mean_length"] = r.mean_length;
          d["scores"] = r.scores;
          return d;
        },
        py::arg("config"), py::arg("baseline"), py::arg("episodes") = 16, py::arg("seed") = 0);

  m.def("train",
        [](const std::string& config_text, const std::string& out_dir) {
          const auto config = parse_config(config_text);
          TrainOptions opt;
          opt.out_dir = out_dir;
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = train(config, opt);
          }
          py::list rows;
          for (const auto& row : r.record.rows) rows.append(row_dict(row));
          py::dict d;
          d["rows"] = rows;
          d["env_steps"] = r.env_steps;
          d["episodes"] = r.episodes;
          d["train_steps"] = r.train_steps;
          d["best_mean_score"] = r.record.best_mean_score();
          return d;
        },
        py::arg("config"), py::arg("out_dir") = "",
        "Runs a seeded training job; with out_dir, writes the run artifacts there.");

  m.def("evaluate_checkpoint",
        [](const std::string& checkpoint, int episodes, std::uint64_t seed) {
          auto agent = load_agent(checkpoint);
          const auto data = load_datasets(agent.config);
          Rng rng(seed);
          return evaluate(*agent.policy, data.eval, agent.config.env_config(), episodes, rng)
              .mean_score;
        },
        py::arg("checkpoint"), py::arg("episodes") = 16, py::arg("seed") = 0);

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SectionParseError>(m, "SectionParseError", PyExc_ValueError);
  py::register_exception<ToolpathError>(m, "ToolpathError", PyExc_ValueError);
}
