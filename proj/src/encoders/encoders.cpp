#include "crossrec/encoders/encoders.hpp"

#include <spdlog/spdlog.h>

#include <string>

#include "crossrec/numcore/checkpoint.hpp"

namespace crossrec::encoders {

using numcore::Tape;
using numcore::Var;

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::encode:
      return "encode";
    case EncoderKind::concat:
      return "concat";
    case EncoderKind::autoenc:
      return "auto";
  }
  return "encode";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "encode") return EncoderKind::encode;
  if (name == "concat") return EncoderKind::concat;
  if (name == "auto") return EncoderKind::autoenc;
  throw ConfigError("unknown encoder: " + std::string(name));
}

Mat encode_maxpool(const Mat& actions) {
  if (actions.rows() == 0) throw Error("encode_maxpool: empty session");
  return actions.colwise().maxCoeff();
}

Mat concat_sessions(const std::vector<Mat>& sessions) {
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const auto& s : sessions) {
    if (cols >= 0 && s.cols() != cols) throw Error("concat_sessions: width mismatch");
    cols = s.cols();
    rows += s.rows();
  }
  Mat out(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index r = 0;
  for (const auto& s : sessions) {
    out.middleRows(r, s.rows()) = s;
    r += s.rows();
  }
  return out;
}

ActionCoder::ActionCoder(const dataio::ActionVocabulary& model, const dataio::ActionVocabulary& data)
    : data_(&data), object_offset_(model.object_offset()), type_offset_(model.type_offset()), width_(model.width()) {
  // Categories the model never saw map to kUnknown; using one is an error.
  auto remap = [](const std::vector<std::string>& names, auto&& lookup) {
    std::vector<std::uint32_t> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(lookup(n).value_or(kUnknown));
    return out;
  };
  section_ = remap(data.sections(), [&](const std::string& n) { return model.section_index(n); });
  object_ = remap(data.objects(), [&](const std::string& n) { return model.object_index(n); });
  type_ = remap(data.types(), [&](const std::string& n) { return model.type_index(n); });
}

std::array<std::uint32_t, 3> ActionCoder::components(const dataio::Action& a) const {
  if (a.section >= section_.size() || section_[a.section] == kUnknown) {
    throw DataError("unknown section: " + data_->sections().at(a.section));
  }
  if (a.object >= object_.size() || object_[a.object] == kUnknown) {
    throw DataError("unknown object: " + data_->objects().at(a.object));
  }
  if (a.type >= type_.size() || type_[a.type] == kUnknown) {
    throw DataError("unknown type: " + data_->types().at(a.type));
  }
  return {section_[a.section], object_[a.object], type_[a.type]};
}

Mat ActionCoder::session_matrix(const dataio::Session& s) const {
  Mat m = Mat::Zero(static_cast<Eigen::Index>(s.actions.size()), static_cast<Eigen::Index>(width_));
  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    const auto c = components(s.actions[i]);
    const auto r = static_cast<Eigen::Index>(i);
    m(r, c[0]) = 1.0;
    m(r, static_cast<Eigen::Index>(object_offset_ + c[1])) = 1.0;
    m(r, static_cast<Eigen::Index>(type_offset_ + c[2])) = 1.0;
  }
  return m;
}

void to_json(nlohmann::json& j, const AutoencoderConfig& c) {
  j = {{"units", c.units},
       {"batch_size", c.train.batch_size},
       {"max_epochs", c.train.max_epochs},
       {"patience", c.train.patience},
       {"learning_rate", c.train.adam.learning_rate},
       {"seed", c.train.seed}};
}

void from_json(const nlohmann::json& j, AutoencoderConfig& c) {
  c.units = j.value("units", c.units);
  c.train.batch_size = j.value("batch_size", c.train.batch_size);
  c.train.max_epochs = j.value("max_epochs", c.train.max_epochs);
  c.train.patience = j.value("patience", c.train.patience);
  c.train.adam.learning_rate = j.value("learning_rate", c.train.adam.learning_rate);
  c.train.seed = j.value("seed", c.train.seed);
  c.train.hidden_units = c.units;
}

Autoencoder Autoencoder::create(const dataio::ActionVocabulary& vocab, std::size_t units, std::uint64_t seed) {
  if (units == 0) throw ConfigError("autoencoder units must be positive");
  Autoencoder ae;
  ae.sizes_ = {vocab.sections().size(), vocab.objects().size(), vocab.types().size()};
  numcore::Rng rng(seed);
  const std::size_t width = vocab.width();
  ae.encoder_ = numcore::GruLayer::create(ae.params_, "ae/encoder", width, units, rng);
  ae.decoder_ = numcore::GruLayer::create(ae.params_, "ae/decoder", width, units, rng);
  const char* names[3] = {"ae/section", "ae/object", "ae/type"};
  for (std::size_t h = 0; h < 3; ++h) {
    ae.heads_[h] = numcore::DenseLayer::create(ae.params_, names[h], units, ae.sizes_[h],
                                               numcore::Activation::identity, rng);
  }
  return ae;
}

std::array<std::uint32_t, 3> Autoencoder::split_row(const Mat& session, Eigen::Index r) const {
  std::array<std::uint32_t, 3> out{};
  Eigen::Index offset = 0;
  for (std::size_t h = 0; h < 3; ++h) {
    const auto n = static_cast<Eigen::Index>(sizes_[h]);
    Eigen::Index idx = 0;
    session.row(r).segment(offset, n).maxCoeff(&idx);
    out[h] = static_cast<std::uint32_t>(idx);
    offset += n;
  }
  return out;
}

namespace {

Mat shifted(const Mat& session) {
  Mat in = Mat::Zero(session.rows(), session.cols());
  if (session.rows() > 1) in.bottomRows(session.rows() - 1) = session.topRows(session.rows() - 1);
  return in;
}

}  // namespace

Var Autoencoder::reconstruction_loss(Tape& tape, const Mat& session) const {
  if (session.rows() == 0) throw Error("autoencoder: empty session");
  if (static_cast<std::size_t>(session.cols()) != input_width()) throw Error("autoencoder: input width mismatch");
  const auto enc = encoder_.run(tape, session);
  const auto dec = decoder_.run(tape, shifted(session), enc.back());
  Var states = tape.stack_rows(dec);
  std::array<std::vector<std::uint32_t>, 3> targets;
  for (Eigen::Index r = 0; r < session.rows(); ++r) {
    const auto c = split_row(session, r);
    for (std::size_t h = 0; h < 3; ++h) targets[h].push_back(c[h]);
  }
  Var total = tape.softmax_cross_entropy_rows(heads_[0].apply(tape, states), targets[0]);
  for (std::size_t h = 1; h < 3; ++h) {
    total = tape.add(total, tape.softmax_cross_entropy_rows(heads_[h].apply(tape, states), targets[h]));
  }
  return tape.scale(total, 1.0 / static_cast<double>(session.rows()));
}

Mat Autoencoder::embed(const Mat& session) const {
  if (session.rows() == 0) throw Error("autoencoder: empty session");
  if (static_cast<std::size_t>(session.cols()) != input_width()) throw Error("autoencoder: input width mismatch");
  const auto w = encoder_.weights(params_);
  Mat h = Mat::Zero(1, static_cast<Eigen::Index>(units()));
  for (Eigen::Index r = 0; r < session.rows(); ++r) h = numcore::gru_cell(session.row(r), h, w);
  return h;
}

Mat Autoencoder::head_logits(const Mat& states, std::size_t head) const {
  return numcore::dense(states, params_[heads_[head].weight].value, params_[heads_[head].bias].value,
                        numcore::Activation::identity);
}

std::vector<std::array<std::uint32_t, 3>> Autoencoder::reconstruct(const Mat& session) const {
  Mat h = embed(session);
  const auto w = decoder_.weights(params_);
  Mat x = Mat::Zero(1, static_cast<Eigen::Index>(input_width()));
  std::vector<std::array<std::uint32_t, 3>> out;
  for (Eigen::Index r = 0; r < session.rows(); ++r) {
    h = numcore::gru_cell(x, h, w);
    std::array<std::uint32_t, 3> pred{};
    x.setZero();
    Eigen::Index offset = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      Eigen::Index idx = 0;
      head_logits(h, k).row(0).maxCoeff(&idx);
      pred[k] = static_cast<std::uint32_t>(idx);
      x(0, offset + idx) = 1.0;
      offset += static_cast<Eigen::Index>(sizes_[k]);
    }
    out.push_back(pred);
  }
  return out;
}

nlohmann::json Autoencoder::to_json() const {
  return {{"units", units()}, {"head_sizes", sizes_}, {"params", numcore::params_to_json(params_)}};
}

Autoencoder Autoencoder::from_json(const nlohmann::json& j) {
  const auto sizes = j.at("head_sizes").get<std::array<std::size_t, 3>>();
  // Rebuild the layer layout, then overwrite the values by name.
  std::vector<std::string> s(sizes[0]), o(sizes[1]), t(sizes[2]);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = "s" + std::to_string(i);
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = "o" + std::to_string(i);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = "t" + std::to_string(i);
  Autoencoder ae = create(dataio::ActionVocabulary(s, o, t, dataio::Catalog{}), j.at("units").get<std::size_t>(), 0);
  numcore::assign_params(ae.params_, j.at("params"));
  return ae;
}

AutoencoderFit fit_autoencoder(const std::vector<Mat>& train, const std::vector<Mat>& validation,
                               const dataio::ActionVocabulary& vocab, const AutoencoderConfig& cfg) {
  if (train.empty() || validation.empty()) throw Error("autoencoder needs training and validation sessions");
  AutoencoderFit out{Autoencoder::create(vocab, cfg.units, cfg.train.seed), {}};
  Autoencoder& ae = out.model;
  auto loss = [&](Tape& tape, numcore::Split split, std::size_t i, numcore::Rng*) {
    return ae.reconstruction_loss(tape, split == numcore::Split::train ? train[i] : validation[i]);
  };
  out.history = numcore::fit(ae.params(), loss, train.size(), validation.size(), cfg.train);
  spdlog::info("autoencoder: best epoch {} validation loss {:.4f}", out.history.best_epoch,
               out.history.validation_loss.empty() ? 0.0
                                                   : out.history.validation_loss[out.history.best_epoch - 1]);
  return out;
}

TaskEncoder::TaskEncoder(EncoderKind kind, dataio::ActionVocabulary vocab, std::optional<Autoencoder> autoencoder)
    : kind_(kind), vocab_(std::move(vocab)), autoencoder_(std::move(autoencoder)) {
  if (kind_ == EncoderKind::autoenc && !autoencoder_) throw ConfigError("auto encoder needs a trained autoencoder");
  if (autoencoder_ && autoencoder_->input_width() != vocab_.width()) {
    throw Error("autoencoder does not match the action vocabulary");
  }
}

std::size_t TaskEncoder::width() const {
  return kind_ == EncoderKind::autoenc ? autoencoder_->units() : vocab_.width();
}

TaskInput TaskEncoder::encode(const ActionCoder& coder, const dataio::User& user,
                              const segmentation::Task& task) const {
  if (task.sessions.empty()) throw Error("task has no sessions");
  TaskInput in;
  std::vector<Mat> rows;
  rows.reserve(task.sessions.size());
  std::size_t steps = 0;
  for (auto si : task.sessions) {
    const auto& s = user.sessions.at(si);
    Mat m = coder.session_matrix(s);
    switch (kind_) {
      case EncoderKind::encode:
        rows.push_back(encode_maxpool(m));
        in.step_time.push_back(s.start);
        break;
      case EncoderKind::autoenc:
        rows.push_back(autoencoder_->embed(m));
        in.step_time.push_back(s.start);
        break;
      case EncoderKind::concat:
        for (const auto& a : s.actions) in.step_time.push_back(std::max(a.time, s.start));
        rows.push_back(std::move(m));
        break;
    }
    steps += static_cast<std::size_t>(rows.back().rows());
    in.session_end.push_back(steps - 1);
  }
  in.steps = concat_sessions(rows);
  return in;
}

nlohmann::json vocab_to_json(const dataio::ActionVocabulary& v) {
  return {{"sections", v.sections()}, {"objects", v.objects()}, {"types", v.types()}};
}

dataio::ActionVocabulary vocab_from_json(const nlohmann::json& j, const dataio::Catalog& catalog) {
  return dataio::ActionVocabulary(j.at("sections").get<std::vector<std::string>>(),
                                  j.at("objects").get<std::vector<std::string>>(),
                                  j.at("types").get<std::vector<std::string>>(), catalog);
}

}  // namespace crossrec::encoders
