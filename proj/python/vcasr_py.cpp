// Python bindings: corpus synthesis, grounding, metrics, checkpoints and decoding.

#include "vcasr/experiment.hpp"
#include "vcasr/metrics.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace vcasr;

namespace {

const Utterance& find_utt(const Corpus& c, const std::string& id) {
  for (const auto& s : kSplits) {
    for (const auto& u : c.split(s)) {
      if (u.id == id) return u;
    }
  }
  throw InputError("no utterance with id '" + id + "'");
}

struct LoadedModel {
  std::shared_ptr<Model> model;

  std::vector<std::pair<std::vector<std::string>, double>> decode(const Corpus& c, const std::string& id,
                                                                  int beam, int n_best, int max_len) const {
    const Utterance& u = find_utt(c, id);
    ModelInput in;
    in.audio = &u.audio;
    in.visual = &u.visual;
    const auto list = model->decode(in, BeamConfig{beam, n_best, max_len});
    std::vector<std::pair<std::vector<std::string>, double>> out;
    for (const auto& h : list.hyps) out.emplace_back(hypothesis_word_strings(h, c.lexicon), h.score);
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_vcasr, m) {
  m.doc() = "visual-context-aware ASR lab";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<LexiconError>(m, "LexiconError", PyExc_KeyError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_OSError);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_function_words", &SynthConfig::n_function_words)
      .def_readwrite("n_content_words", &SynthConfig::n_content_words)
      .def_readwrite("n_homophone_pairs", &SynthConfig::n_homophone_pairs)
      .def_readwrite("sentence_len_min", &SynthConfig::sentence_len_min)
      .def_readwrite("sentence_len_max", &SynthConfig::sentence_len_max)
      .def_readwrite("p_content", &SynthConfig::p_content)
      .def_readwrite("d_audio", &SynthConfig::d_audio)
      .def_readwrite("d_raw_video", &SynthConfig::d_raw_video)
      .def_readwrite("d_embed", &SynthConfig::d_embed)
      .def_readwrite("frames_per_token_audio", &SynthConfig::frames_per_token_audio)
      .def_readwrite("frames_per_token_video", &SynthConfig::frames_per_token_video)
      .def_readwrite("sigma_audio", &SynthConfig::sigma_audio)
      .def_readwrite("sigma_video", &SynthConfig::sigma_video)
      .def_readwrite("window", &SynthConfig::window)
      .def_readwrite("stride", &SynthConfig::stride)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("n_train", &SynthConfig::n_train)
      .def_readwrite("n_dev", &SynthConfig::n_dev)
      .def_readwrite("n_test", &SynthConfig::n_test)
      .def("validate", &SynthConfig::validate);

  py::class_<Utterance>(m, "Utterance")
      .def_readonly("id", &Utterance::id)
      .def_readonly("words", &Utterance::words)
      .def_readonly("token_ids", &Utterance::token_ids)
      .def_readonly("audio", &Utterance::audio)
      .def_readonly("raw_video", &Utterance::raw_video)
      .def_readonly("visual", &Utterance::visual)
      .def_property_readonly("masked_words", [](const Utterance& u) {
        std::vector<int> w;
        for (const auto& s : u.mask_spans) w.push_back(s.word_index);
        return w;
      });

  py::class_<Corpus>(m, "Corpus")
      .def_readonly("config", &Corpus::config)
      .def_readonly("train", &Corpus::train)
      .def_readonly("dev", &Corpus::dev)
      .def_readonly("test", &Corpus::test)
      .def_property_readonly("vocab_size", [](const Corpus& c) { return c.lexicon.vocab_size(); })
      .def_property_readonly("words", [](const Corpus& c) {
        std::vector<std::string> w;
        for (const auto& e : c.lexicon.entries()) w.push_back(e.word);
        return w;
      })
      .def("utterance", &find_utt, py::return_value_policy::reference_internal);

  m.def("generate_corpus", &generate_corpus, py::arg("config"));
  m.def("mask_corpus", &mask_corpus, py::arg("clean"), py::arg("threshold") = kMaskThreshold,
        py::arg("seed") = 1);
  m.def("write_corpus", [](const std::filesystem::path& dir, const Corpus& c, bool force) {
    write_corpus(dir, c, CorpusInfo{}, force);
  }, py::arg("dir"), py::arg("corpus"), py::arg("force") = false);
  m.def("read_corpus", [](const std::filesystem::path& dir) { return read_corpus(dir); });
  m.def("hash_directory", [](const std::filesystem::path& dir) { return hex64(hash_directory(dir)); });

  m.def("similarity_matrix", [](const Corpus& c, const std::string& id, std::optional<std::vector<std::string>> words) {
    const Utterance& u = find_utt(c, id);
    const JointEmbedding emb(c.lexicon, c.config.window, c.config.stride);
    return similarity_matrix(emb, words ? *words : u.words, u.visual);
  }, py::arg("corpus"), py::arg("utt"), py::arg("words") = py::none());
  m.def("vg_context", [](const Corpus& c, const std::string& id, std::optional<std::vector<std::string>> words) {
    const Utterance& u = find_utt(c, id);
    const JointEmbedding emb(c.lexicon, c.config.window, c.config.stride);
    const auto r = vg_context(emb, words ? *words : u.words, u.visual);
    return py::make_tuple(r.alpha, r.context);
  }, py::arg("corpus"), py::arg("utt"), py::arg("words") = py::none());

  m.def("edit_distance", [](const Words& ref, const Words& hyp) { return edit_alignment(ref, hyp).cost; });
  m.def("wer", [](const std::vector<Words>& refs, const std::vector<Words>& hyps) { return wer(refs, hyps).wer; });
  m.def("oracle_wer", [](const std::vector<Words>& refs, const std::vector<std::vector<Words>>& nbests) {
    return oracle_wer(refs, nbests);
  });
  m.def("recovery_rate", [](const std::vector<Words>& refs, const std::vector<Words>& hyps,
                            const std::vector<std::vector<int>>& masked) {
    return recovery_rate(refs, hyps, masked).rate;
  });
  m.def("relative_improvement", &relative_improvement);
  m.def("relative_improvement_rr", &relative_improvement_rr);

  py::class_<LoadedModel>(m, "Model")
      .def_property_readonly("kind", [](const LoadedModel& lm) { return to_string(lm.model->config().kind); })
      .def_property_readonly("checkpoint_hash", [](const LoadedModel& lm) { return hex64(lm.model->checkpoint().hash()); })
      .def("decode", &LoadedModel::decode, py::arg("corpus"), py::arg("utt"), py::arg("beam") = 10,
           py::arg("n_best") = 10, py::arg("max_len") = 34)
      .def("save", [](const LoadedModel& lm, const std::filesystem::path& p) { save_checkpoint(p, lm.model->checkpoint()); });

  m.def("load_model", [](const std::filesystem::path& path, const Corpus& c) {
    auto model = std::make_shared<Model>(Model::from_checkpoint(load_checkpoint(path)));
    attach_grounding(*model, c);
    return LoadedModel{model};
  }, py::arg("path"), py::arg("corpus"));

  m.def("train", [](const Corpus& c, const std::string& kind, const std::string& fusion, int steps, int hidden,
                    int audio_layers, std::uint64_t seed) {
    const ModelKind k = parse_model_kind(kind);
    if (k != ModelKind::AudioOnly && k != ModelKind::MultiStream) {
      throw ConfigError("kind: train() supports audio-only and multistream");
    }
    ModelConfig mc = corpus_model_config(c, k, parse_fusion_mode(fusion));
    mc.hidden = hidden;
    mc.d_model = hidden;
    mc.embed_dim = hidden;
    mc.attention.dim = hidden;
    mc.audio_layers = audio_layers;
    TrainConfig tc;
    tc.steps = steps;
    tc.eval_every = std::max(1, steps);
    tc.seed = seed;
    TrainResult tr;
    {
      py::gil_scoped_release release;
      tr = k == ModelKind::AudioOnly ? train_audio_only(c, mc, tc) : train_multistream(c, mc, tc);
    }
    auto model = std::make_shared<Model>(Model::from_checkpoint(tr.best));
    return py::make_tuple(LoadedModel{model}, tr.losses);
  }, py::arg("corpus"), py::arg("kind") = "audio-only", py::arg("fusion") = "gate", py::arg("steps") = 100,
     py::arg("hidden") = 32, py::arg("audio_layers") = 6, py::arg("seed") = 1);
}
