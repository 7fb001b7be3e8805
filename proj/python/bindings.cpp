#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "syncprobe/analysis.hpp"
#include "syncprobe/channel.hpp"
#include "syncprobe/error.hpp"
#include "syncprobe/microbench.hpp"
#include "syncprobe/profiles.hpp"
#include "syncprobe/trace.hpp"

namespace py = pybind11;
using namespace syncprobe;

namespace {

std::vector<double> as_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

IoOp make_op(const std::string& name, std::uint64_t size) {
  if (name == "baseline") return IoOp::flush_all();
  IoOp op{parse_op_kind(name), 0};
  if (op.kind == IoOpKind::Write || op.kind == IoOpKind::WriteSync) op.size_bytes = size;
  return op;
}

py::dict report_dict(const ChannelReport& r) {
  py::dict d;
  d["sent_bits"] = r.sent_bits;
  d["elapsed"] = r.elapsed;
  d["bandwidth_kbps"] = r.bandwidth_kbps;
  d["edit_distance"] = r.edit_distance;
  d["error_rate"] = r.error_rate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_syncprobe, m) {
  m.doc() = "syncprobe native core";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = errc_name(e.code());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<IoOp>(m, "IoOp")
      .def(py::init(&make_op), py::arg("kind"), py::arg("size_bytes") = 0)
      .def_property_readonly("kind", [](const IoOp& op) { return std::string(op_kind_name(op.kind)); })
      .def_readonly("size_bytes", &IoOp::size_bytes)
      .def("__repr__", [](const IoOp& op) { return "IoOp(" + bench_op_name(op) + ")"; });

  py::class_<DelayProfile>(m, "DelayProfile")
      .def_readwrite("name", &DelayProfile::name)
      .def_readwrite("base_delay", &DelayProfile::base_delay)
      .def_readwrite("page_cost", &DelayProfile::page_cost)
      .def_readwrite("above_page_cost", &DelayProfile::above_page_cost)
      .def_readwrite("inode_cost", &DelayProfile::inode_cost)
      .def_readwrite("journal_cost", &DelayProfile::journal_cost)
      .def_readwrite("per_file_write_slope", &DelayProfile::per_file_write_slope)
      .def_readwrite("noise_sigma", &DelayProfile::noise_sigma)
      .def_readwrite("noise_slope", &DelayProfile::noise_slope)
      .def_property(
          "noise",
          [](const DelayProfile& p) { return std::string(noise_kind_name(p.noise_kind)); },
          [](DelayProfile& p, const std::string& k) { p.noise_kind = parse_noise_kind(k); })
      .def("__str__", &format_profile);

  m.def("profile_names", &builtin_profile_names);
  m.def("profile", &find_profile, py::arg("name"));

  py::class_<DelayTrace>(m, "DelayTrace")
      .def("__len__", &DelayTrace::size)
      .def_readonly("profile", &DelayTrace::profile)
      .def_readonly("achieved_rate", &DelayTrace::achieved_rate)
      .def_property_readonly("clock_hz", [](const DelayTrace& t) { return t.clock.cycles_per_second; })
      .def_property_readonly("delays", [](const DelayTrace& t) {
        auto v = t.delays();
        return py::array_t<double>(v.size(), v.data());
      })
      .def_property_readonly("timestamps", [](const DelayTrace& t) {
        py::array_t<std::uint64_t> a(t.samples.size());
        auto* out = a.mutable_data();
        for (std::size_t i = 0; i < t.samples.size(); ++i) out[i] = t.samples[i].timestamp.cycles;
        return a;
      });
  m.def("read_trace", &read_trace, py::arg("path"));
  m.def("write_trace", &write_trace, py::arg("trace"), py::arg("path"));

  py::class_<Spectrogram>(m, "Spectrogram")
      .def_readonly("freq_bins", &Spectrogram::freq_bins)
      .def_readonly("frames", &Spectrogram::frames)
      .def_readonly("window_size", &Spectrogram::window_size)
      .def_readonly("hop", &Spectrogram::hop)
      .def_readonly("source_trace", &Spectrogram::source_trace)
      .def_property_readonly("magnitudes", [](const Spectrogram& s) {
        py::array_t<double> a({s.freq_bins, s.frames});
        std::copy(s.magnitudes.begin(), s.magnitudes.end(), a.mutable_data());
        return a;
      });
  m.def("read_spectrogram", &read_spectrogram, py::arg("path"));
  m.def("write_spectrogram", &write_spectrogram, py::arg("spec"), py::arg("path"), py::arg("label") = "");

  m.def(
      "stft",
      [](py::object values, std::uint32_t window, std::uint32_t hop) {
        if (py::isinstance<DelayTrace>(values)) return stft(values.cast<const DelayTrace&>(), window, hop);
        auto v = as_vector(values.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>());
        return stft(std::span<const double>(v), window, hop);
      },
      py::arg("values"), py::arg("window_size") = 256, py::arg("hop") = 128);

  m.def(
      "snr",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> signal,
         py::array_t<double, py::array::c_style | py::array::forcecast> noise) {
        auto s = as_vector(signal), n = as_vector(noise);
        return snr(std::span<const double>(s), std::span<const double>(n)).snr;
      },
      py::arg("signal"), py::arg("noise"));

  m.def(
      "detect_spikes",
      [](const DelayTrace& t, double z, std::size_t sep) {
        py::list out;
        for (const auto& e : detect_spikes(t, z, sep)) out.append(py::make_tuple(e.index, e.delay, e.z_score));
        return out;
      },
      py::arg("trace"), py::arg("z") = 6.0, py::arg("min_separation") = 16);

  m.def(
      "fit_linear",
      [](const std::vector<std::pair<double, double>>& points) {
        LinearFit f = fit_linear(points);
        return py::make_tuple(f.slope, f.intercept, f.r_squared);
      },
      py::arg("points"), "OLS fit; returns (slope, intercept, r_squared).");

  m.def("levenshtein", &levenshtein, py::arg("a"), py::arg("b"));
  m.def(
      "calibrate_threshold",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> delays) {
        auto v = as_vector(delays);
        return calibrate_threshold(std::span<const double>(v));
      },
      py::arg("delays"));
  m.def("bytes_to_bits", [](const py::bytes& b) {
    std::string s = b;
    return bytes_to_bits(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  });
  m.def("bits_to_bytes", [](const std::string& bits) {
    auto v = bits_to_bytes(bits);
    return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
  });

  py::class_<ChannelConfig>(m, "ChannelConfig")
      .def(py::init<>())
      .def_static("for_profile", &ChannelConfig::for_profile)
      .def_readwrite("bit_period", &ChannelConfig::bit_period)
      .def_readwrite("spin_one", &ChannelConfig::spin_one)
      .def_readwrite("spin_zero", &ChannelConfig::spin_zero)
      .def_readwrite("write_size", &ChannelConfig::write_size)
      .def_readwrite("threshold", &ChannelConfig::threshold)
      .def_readwrite("start_code", &ChannelConfig::start_code)
      .def_readwrite("end_code", &ChannelConfig::end_code);

  m.def(
      "footprint",
      [](const DelayProfile& profile, const std::string& op, std::uint64_t size, std::uint64_t reps,
         std::uint64_t seed) {
        SimulatedBackend backend(profile, seed);
        SimulatedClock clock;
        BenchStats s = run_footprint_bench(backend, clock, make_op(op, size), reps);
        return py::make_tuple(s.mean, s.stddev);
      },
      py::arg("profile"), py::arg("op"), py::arg("size_bytes") = 4096, py::arg("reps") = 1000,
      py::arg("seed") = 0, "Simulated flush delay after `op`; returns (mean, stddev) in cycles.");

  m.def(
      "loopback",
      [](const py::bytes& payload, const DelayProfile& profile, std::optional<ChannelConfig> config,
         std::uint64_t seed) {
        std::string s = payload;
        Bits bits = bytes_to_bits(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
        SimulatedBackend backend(profile, seed);
        ChannelConfig cfg = config ? *config : ChannelConfig::for_profile(profile);
        LoopbackResult r;
        {
          py::gil_scoped_release release;
          r = run_loopback(backend, bits, cfg);
        }
        py::dict d = report_dict(r.report);
        d["threshold"] = r.decoded.threshold;
        d["end_code_found"] = r.decoded.end_found;
        auto out = bits_to_bytes(r.decoded.payload);
        d["decoded"] = py::bytes(reinterpret_cast<const char*>(out.data()), out.size());
        return d;
      },
      py::arg("payload"), py::arg("profile"), py::arg("config") = py::none(), py::arg("seed") = 0);
}
