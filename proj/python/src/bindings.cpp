/* Copyright 2026 The crowd-suppress Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <string>
#include <vector>

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "crowd/assignment.hpp"
#include "crowd/emd.hpp"
#include "crowd/error.hpp"
#include "crowd/geometry.hpp"
#include "crowd/io_format.hpp"
#include "crowd/metrics.hpp"
#include "crowd/suppression.hpp"
#include "crowd/synth.hpp"
#include "crowd/version.hpp"

namespace py = pybind11;
using namespace crowd;

namespace {

std::string box_repr(const BBox& b) {
  return "BBox(" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
         std::to_string(b.x2) + ", " + std::to_string(b.y2) + ")";
}

CostMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  CostMatrix c(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) {
      throw InvalidInput("cost matrix must be square");
    }
    for (std::size_t col = 0; col < rows.size(); ++col) c(r, col) = rows[r][col];
  }
  return c;
}

MatchStrategy to_strategy(const std::string& s) {
  if (s == "auto") return MatchStrategy::kAuto;
  if (s == "exhaustive") return MatchStrategy::kExhaustive;
  if (s == "solver") return MatchStrategy::kSolver;
  throw InvalidInput("strategy must be auto, exhaustive or solver");
}

SuppressionConfig make_suppression(const std::string& method, double iou_thresh,
                                   double sigma, double score_floor) {
  SuppressionConfig cfg;
  cfg.method = parse_suppression_method(method);
  cfg.iou_thresh = iou_thresh;
  cfg.sigma = sigma;
  cfg.score_floor = score_floor;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Crowded-scene detection: set assignment, EMD matching, Set NMS "
            "and evaluation";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "CrowdError", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<InvalidGeometry>(m, "InvalidGeometry", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<UndefinedMetric>(m, "UndefinedMetric", base.ptr());
  py::register_exception<GtSetOverflow>(m, "GtSetOverflow", base.ptr());
  py::register_exception<PlacementError>(m, "PlacementError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<BBox>(m, "BBox")
      .def(py::init<>())
      .def(py::init([](double x1, double y1, double x2, double y2) {
             return BBox{x1, y1, x2, y2};
           }),
           py::arg("x1"), py::arg("y1"), py::arg("x2"), py::arg("y2"))
      .def_static("from_xywh", &BBox::from_xywh)
      .def_readwrite("x1", &BBox::x1)
      .def_readwrite("y1", &BBox::y1)
      .def_readwrite("x2", &BBox::x2)
      .def_readwrite("y2", &BBox::y2)
      .def_property_readonly("width", &BBox::width)
      .def_property_readonly("height", &BBox::height)
      .def_property_readonly("area", &BBox::area)
      .def("translated", &BBox::translated)
      .def("to_list", [](const BBox& b) { return std::vector{b.x1, b.y1, b.x2, b.y2}; })
      .def(py::self == py::self)
      .def("__repr__", &box_repr);

  py::class_<BoxDelta>(m, "BoxDelta")
      .def(py::init<>())
      .def(py::init([](double dx, double dy, double dw, double dh) {
             return BoxDelta{dx, dy, dw, dh};
           }),
           py::arg("dx"), py::arg("dy"), py::arg("dw"), py::arg("dh"))
      .def_readwrite("dx", &BoxDelta::dx)
      .def_readwrite("dy", &BoxDelta::dy)
      .def_readwrite("dw", &BoxDelta::dw)
      .def_readwrite("dh", &BoxDelta::dh);

  py::class_<GroundTruth>(m, "GroundTruth")
      .def(py::init([](BBox box, int class_id, bool ignore) {
             return GroundTruth{box, class_id, ignore};
           }),
           py::arg("box"), py::arg("class_id") = kDefaultClass,
           py::arg("ignore") = false)
      .def_readwrite("box", &GroundTruth::box)
      .def_readwrite("class_id", &GroundTruth::class_id)
      .def_readwrite("ignore", &GroundTruth::ignore)
      .def(py::self == py::self);

  py::class_<Detection>(m, "Detection")
      .def(py::init([](BBox box, double score, int class_id,
                       std::int64_t proposal_id, int slot) {
             return Detection{box, score, class_id, proposal_id, slot};
           }),
           py::arg("box"), py::arg("score"), py::arg("class_id") = kDefaultClass,
           py::arg("proposal_id") = 0, py::arg("slot") = 0)
      .def_readwrite("box", &Detection::box)
      .def_readwrite("score", &Detection::score)
      .def_readwrite("class_id", &Detection::class_id)
      .def_readwrite("proposal_id", &Detection::proposal_id)
      .def_readwrite("slot", &Detection::slot)
      .def(py::self == py::self);

  py::class_<SceneRecord>(m, "SceneRecord")
      .def(py::init<>())
      .def_readwrite("id", &SceneRecord::id)
      .def_readwrite("width", &SceneRecord::width)
      .def_readwrite("height", &SceneRecord::height)
      .def_readwrite("gts", &SceneRecord::gts)
      .def_readwrite("dets", &SceneRecord::dets)
      .def(py::self == py::self);

  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def("encode_delta", &encode_delta, py::arg("proposal"), py::arg("target"));
  m.def("decode_delta", &decode_delta, py::arg("proposal"), py::arg("delta"));

  // Set assignment
  py::class_<GtSetEntry>(m, "GtSetEntry")
      .def_readonly("gt", &GtSetEntry::gt)
      .def_readonly("dummy", &GtSetEntry::dummy)
      .def_readonly("source_index", &GtSetEntry::source_index)
      .def_readonly("overlap", &GtSetEntry::overlap);
  py::class_<GtSet>(m, "GtSet")
      .def_readonly("entries", &GtSet::entries)
      .def_readonly("source_proposal", &GtSet::source_proposal)
      .def_readonly("theta", &GtSet::theta)
      .def("real_count", &GtSet::real_count)
      .def("__len__", &GtSet::size);
  m.def("build_gt_set",
        [](const BBox& proposal, const std::vector<GroundTruth>& gts, double theta) {
          return build_gt_set(proposal, gts, theta);
        },
        py::arg("proposal"), py::arg("gts"), py::arg("theta") = kDefaultIouThreshold);
  m.def("pad_to_k",
        [](GtSet set, std::size_t k, bool truncate) {
          return pad_to_k(std::move(set), k,
                          truncate ? OverflowPolicy::kTruncateTopK
                                   : OverflowPolicy::kError);
        },
        py::arg("gt_set"), py::arg("k"), py::arg("truncate") = false);

  // EMD
  py::class_<SlotPrediction>(m, "SlotPrediction")
      .def(py::init([](std::vector<double> scores, BoxDelta delta) {
             return SlotPrediction{std::move(scores), delta};
           }),
           py::arg("class_scores"), py::arg("delta") = BoxDelta{})
      .def_readwrite("class_scores", &SlotPrediction::class_scores)
      .def_readwrite("delta", &SlotPrediction::delta);
  py::class_<PredictionSet>(m, "PredictionSet")
      .def(py::init([](BBox proposal, std::vector<SlotPrediction> slots) {
             return PredictionSet{proposal, std::move(slots)};
           }),
           py::arg("proposal"), py::arg("slots"))
      .def_readwrite("proposal", &PredictionSet::proposal)
      .def_readwrite("slots", &PredictionSet::slots);
  py::class_<EmdMatch>(m, "EmdMatch")
      .def_readonly("permutation", &EmdMatch::permutation)
      .def_readonly("per_slot_cost", &EmdMatch::per_slot_cost)
      .def_readonly("total", &EmdMatch::total);

  m.def("emd_match",
        [](const std::vector<std::vector<double>>& costs, const std::string& strategy) {
          return emd_match(to_matrix(costs), to_strategy(strategy));
        },
        py::arg("costs"), py::arg("strategy") = "auto",
        "Minimum-cost permutation of a square cost matrix (rows = slots).");
  m.def("cls_loss",
        [](const std::vector<double>& scores, int target, const std::string& mode,
           double gamma, double alpha) {
          if (mode == "focal") return cls_loss(scores, target, FocalLoss{gamma, alpha});
          if (mode != "ce") throw InvalidInput("mode must be ce or focal");
          return cls_loss(scores, target, CrossEntropy{});
        },
        py::arg("scores"), py::arg("target_class"), py::arg("mode") = "ce",
        py::arg("gamma") = 2.0, py::arg("alpha") = 0.25);
  m.def("smooth_l1", &smooth_l1, py::arg("x"), py::arg("beta") = 1.0);
  m.def("emd_loss",
        [](const PredictionSet& pred, const GtSet& gts, std::size_t k,
           const std::string& mode, double gamma, double alpha, double beta,
           double cls_weight, double reg_weight, bool truncate) {
          EmdConfig cfg;
          cfg.k = k;
          if (mode == "focal") {
            cfg.cls_mode = FocalLoss{gamma, alpha};
          } else if (mode != "ce") {
            throw InvalidInput("mode must be ce or focal");
          }
          cfg.reg_mode.beta = beta;
          cfg.cls_weight = cls_weight;
          cfg.reg_weight = reg_weight;
          cfg.overflow = truncate ? OverflowPolicy::kTruncateTopK
                                  : OverflowPolicy::kError;
          return emd_loss(pred, gts, cfg);
        },
        py::arg("prediction"), py::arg("gt_set"), py::arg("k") = 2,
        py::arg("mode") = "ce", py::arg("gamma") = 2.0, py::arg("alpha") = 0.25,
        py::arg("beta") = 1.0, py::arg("cls_weight") = 1.0,
        py::arg("reg_weight") = 1.0, py::arg("truncate") = false);

  // Suppression
  m.def("suppress",
        [](const std::vector<Detection>& dets, const std::string& method,
           double iou_thresh, double sigma, double score_floor) {
          return suppress(dets, make_suppression(method, iou_thresh, sigma, score_floor));
        },
        py::arg("dets"), py::arg("method") = "nms", py::arg("iou_thresh") = 0.5,
        py::arg("sigma") = 0.5, py::arg("score_floor") = 0.001);
  m.def("nms",
        [](const std::vector<Detection>& dets, double t) {
          return nms(dets, make_suppression("nms", t, 0.5, 0.001));
        },
        py::arg("dets"), py::arg("iou_thresh") = 0.5);
  m.def("set_nms",
        [](const std::vector<Detection>& dets, double t) {
          return set_nms(dets, make_suppression("set-nms", t, 0.5, 0.001));
        },
        py::arg("dets"), py::arg("iou_thresh") = 0.5);

  // Metrics
  py::class_<EvalConfig>(m, "EvalConfig")
      .def(py::init<>())
      .def_readwrite("iou_thresh", &EvalConfig::iou_thresh)
      .def_readwrite("fppi_lo", &EvalConfig::fppi_lo)
      .def_readwrite("fppi_hi", &EvalConfig::fppi_hi)
      .def_readwrite("fppi_points", &EvalConfig::fppi_points)
      .def_property(
          "eleven_point",
          [](const EvalConfig& c) {
            return c.ap_interpolation == ApInterpolation::kElevenPoint;
          },
          [](EvalConfig& c, bool v) {
            c.ap_interpolation =
                v ? ApInterpolation::kElevenPoint : ApInterpolation::kAllPoints;
          })
      .def_property(
          "greedy_ji",
          [](const EvalConfig& c) { return c.ji_matching == JiMatching::kGreedy; },
          [](EvalConfig& c, bool v) {
            c.ji_matching = v ? JiMatching::kGreedy : JiMatching::kMaximum;
          });
  py::class_<RecallCount>(m, "RecallCount")
      .def_readonly("matched", &RecallCount::matched)
      .def_readonly("gt_count", &RecallCount::gt_count)
      .def_property_readonly("ratio", &RecallCount::ratio);
  py::class_<RecallSplit>(m, "RecallSplit")
      .def_readonly("total", &RecallSplit::total)
      .def_readonly("sparse", &RecallSplit::sparse)
      .def_readonly("crowd", &RecallSplit::crowd);
  py::class_<DensityStats>(m, "DensityStats")
      .def_readonly("images", &DensityStats::images)
      .def_readonly("objects_per_image", &DensityStats::objects_per_image)
      .def_readonly("overlaps_per_image", &DensityStats::overlaps_per_image);
  py::class_<BestJi>(m, "BestJi")
      .def_readonly("ji", &BestJi::ji)
      .def_readonly("threshold", &BestJi::threshold);
  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("ap", &EvalReport::ap)
      .def_readonly("mr2", &EvalReport::mr2)
      .def_readonly("ji", &EvalReport::ji)
      .def_readonly("ji_best_threshold", &EvalReport::ji_best_threshold)
      .def_readonly("recall", &EvalReport::recall)
      .def_readonly("density", &EvalReport::density);

  m.def("average_precision",
        [](const std::vector<SceneRecord>& s, const EvalConfig& c) {
          return average_precision(s, c);
        },
        py::arg("scenes"), py::arg("config") = EvalConfig{});
  m.def("mr2",
        [](const std::vector<SceneRecord>& s, const EvalConfig& c) { return mr2(s, c); },
        py::arg("scenes"), py::arg("config") = EvalConfig{});
  m.def("jaccard_index",
        [](const std::vector<SceneRecord>& s, double t, const EvalConfig& c) {
          return jaccard_index(s, c, t);
        },
        py::arg("scenes"), py::arg("score_threshold"), py::arg("config") = EvalConfig{});
  m.def("best_ji",
        [](const std::vector<SceneRecord>& s, const EvalConfig& c) { return best_ji(s, c); },
        py::arg("scenes"), py::arg("config") = EvalConfig{});
  m.def("crowd_flags",
        [](const std::vector<GroundTruth>& gts) { return crowd_flags(gts); },
        py::arg("gts"));
  m.def("evaluate",
        [](const std::vector<SceneRecord>& s, const EvalConfig& c) { return evaluate(s, c); },
        py::arg("scenes"), py::arg("config") = EvalConfig{});

  // Synthetic data
  py::class_<SceneParams>(m, "SceneParams")
      .def(py::init<>())
      .def_readwrite("image_w", &SceneParams::image_w)
      .def_readwrite("image_h", &SceneParams::image_h)
      .def_readwrite("n_objects_mean", &SceneParams::n_objects_mean)
      .def_readwrite("crowd_pairs_mean", &SceneParams::crowd_pairs_mean)
      .def_readwrite("pair_iou_lo", &SceneParams::pair_iou_lo)
      .def_readwrite("pair_iou_hi", &SceneParams::pair_iou_hi)
      .def_readwrite("box_scale_min", &SceneParams::box_scale_min)
      .def_readwrite("box_scale_max", &SceneParams::box_scale_max)
      .def_readwrite("aspect", &SceneParams::aspect)
      .def_readwrite("cluster_size", &SceneParams::cluster_size)
      .def_readwrite("seed", &SceneParams::seed);
  py::class_<DetectorSimParams>(m, "DetectorSimParams")
      .def(py::init<>())
      .def_property(
          "mode",
          [](const DetectorSimParams& p) {
            return p.mode == SimMode::kMip ? "mip" : "single";
          },
          [](DetectorSimParams& p, const std::string& v) {
            if (v != "mip" && v != "single") {
              throw InvalidInput("mode must be mip or single");
            }
            p.mode = v == "mip" ? SimMode::kMip : SimMode::kSingle;
          })
      .def_readwrite("k", &DetectorSimParams::k)
      .def_readwrite("proposal_jitter", &DetectorSimParams::proposal_jitter)
      .def_readwrite("proposals_per_gt", &DetectorSimParams::proposals_per_gt)
      .def_readwrite("theta", &DetectorSimParams::theta)
      .def_readwrite("background_fp_mean", &DetectorSimParams::background_fp_mean)
      .def_readwrite("miss_prob", &DetectorSimParams::miss_prob)
      .def_readwrite("seed", &DetectorSimParams::seed);

  m.def("generate_scene", &generate_scene, py::arg("params"));
  m.def("generate_dataset", &generate_dataset, py::arg("params"),
        py::arg("n_images"), py::arg("jobs") = 1);
  m.def("simulate_detector",
        [](const std::vector<GroundTruth>& gts, const DetectorSimParams& p,
           double width, double height) {
          return simulate_detector(gts, p, ImageSize{width, height});
        },
        py::arg("gts"), py::arg("params"), py::arg("image_w") = 0.0,
        py::arg("image_h") = 0.0);

  // Files
  m.def("read_scenes",
        [](const std::filesystem::path& p) { return parse_scene_file(p); },
        py::arg("path"));
  m.def("write_scenes",
        [](const std::vector<SceneRecord>& r, const std::filesystem::path& p) {
          write_scene_file(r, p);
        },
        py::arg("records"), py::arg("path"));
  m.def("scene_to_json_line", &scene_to_json_line, py::arg("record"));
}
