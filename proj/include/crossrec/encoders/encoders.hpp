#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crossrec/dataio/dataset.hpp"
#include "crossrec/numcore/layers.hpp"
#include "crossrec/numcore/optim.hpp"
#include "crossrec/segmentation/segmentation.hpp"

namespace crossrec::encoders {

using numcore::Mat;

enum class EncoderKind { encode, concat, autoenc };

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);  // "encode" | "concat" | "auto"

// Element-wise maximum over the rows (actions) of a session matrix.
Mat encode_maxpool(const Mat& actions);

// Stacks the action rows of every session, keeping session order.
Mat concat_sessions(const std::vector<Mat>& sessions);

// Binarises actions of one dataset against the vocabulary a model was
// trained with. Categories unknown to the model are an error. The data
// vocabulary must outlive the coder.
class ActionCoder {
 public:
  ActionCoder(const dataio::ActionVocabulary& model, const dataio::ActionVocabulary& data);

  std::size_t width() const { return width_; }
  // (section, object, type) indices in the model vocabulary.
  std::array<std::uint32_t, 3> components(const dataio::Action& a) const;
  Mat session_matrix(const dataio::Session& s) const;

 private:
  static constexpr std::uint32_t kUnknown = UINT32_MAX;

  const dataio::ActionVocabulary* data_;
  std::vector<std::uint32_t> section_, object_, type_;
  std::size_t object_offset_ = 0, type_offset_ = 0, width_ = 0;
};

struct AutoencoderConfig {
  std::size_t units = 64;
  numcore::TrainConfig train{.batch_size = 128, .hidden_units = 64, .dropout_rate = 0.0, .max_epochs = 25};
};

void to_json(nlohmann::json& j, const AutoencoderConfig& c);
void from_json(const nlohmann::json& j, AutoencoderConfig& c);

// Sequence-to-sequence GRU autoencoder over sessions. The decoder starts
// from the encoder's final state and is fed the previous action (zero at the
// first step); three softmax heads reconstruct section, object and type.
class Autoencoder {
 public:
  static Autoencoder create(const dataio::ActionVocabulary& vocab, std::size_t units, std::uint64_t seed);

  std::size_t units() const { return encoder_.hidden; }
  std::size_t input_width() const { return sizes_[0] + sizes_[1] + sizes_[2]; }
  const std::array<std::size_t, 3>& head_sizes() const { return sizes_; }

  // Mean over steps of the summed per-head cross-entropy.
  numcore::Var reconstruction_loss(numcore::Tape& tape, const Mat& session) const;
  // Final encoder hidden state.
  Mat embed(const Mat& session) const;
  // Greedy decoding of (section, object, type) per step.
  std::vector<std::array<std::uint32_t, 3>> reconstruct(const Mat& session) const;

  numcore::ParamSet& params() { return params_; }
  const numcore::ParamSet& params() const { return params_; }

  nlohmann::json to_json() const;
  static Autoencoder from_json(const nlohmann::json& j);

 private:
  std::array<std::uint32_t, 3> split_row(const Mat& session, Eigen::Index r) const;
  Mat head_logits(const Mat& states, std::size_t head) const;

  numcore::ParamSet params_;
  numcore::GruLayer encoder_, decoder_;
  std::array<numcore::DenseLayer, 3> heads_;
  std::array<std::size_t, 3> sizes_{};
};

struct AutoencoderFit {
  Autoencoder model;
  numcore::TrainHistory history;
};

// Sessions are binarised action matrices in the vocabulary's layout.
AutoencoderFit fit_autoencoder(const std::vector<Mat>& train, const std::vector<Mat>& validation,
                               const dataio::ActionVocabulary& vocab, const AutoencoderConfig& cfg);

// Model input for one task.
struct TaskInput {
  Mat steps;                              // one row per time step
  std::vector<std::size_t> session_end;   // step index of the last step of each session
  std::vector<dataio::TimePoint> step_time;
};

// Turns tasks into step sequences for a chosen encoder.
class TaskEncoder {
 public:
  TaskEncoder(EncoderKind kind, dataio::ActionVocabulary vocab, std::optional<Autoencoder> autoencoder = std::nullopt);

  EncoderKind kind() const { return kind_; }
  const dataio::ActionVocabulary& vocab() const { return vocab_; }
  const std::optional<Autoencoder>& autoencoder() const { return autoencoder_; }
  std::size_t width() const;

  ActionCoder coder(const dataio::ActionVocabulary& data_vocab) const { return ActionCoder(vocab_, data_vocab); }
  TaskInput encode(const ActionCoder& coder, const dataio::User& user, const segmentation::Task& task) const;

 private:
  EncoderKind kind_;
  dataio::ActionVocabulary vocab_;
  std::optional<Autoencoder> autoencoder_;
};

nlohmann::json vocab_to_json(const dataio::ActionVocabulary& v);
dataio::ActionVocabulary vocab_from_json(const nlohmann::json& j, const dataio::Catalog& catalog);

}  // namespace crossrec::encoders
