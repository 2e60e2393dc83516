#ifndef SFF_AGENT_HPP
#define SFF_AGENT_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sff/adam.hpp"
#include "sff/nn.hpp"
#include "sff/params.hpp"
#include "sff/random.hpp"
#include "sff/text.hpp"
#include "sff/vdan.hpp"

// Fast-forwarding agent: a velocity/acceleration navigator over video
// frames, trained with REINFORCE plus a learned baseline and an entropy
// bonus.
namespace sff::agent {

enum class Action { kDecelerate = 0, kDoNothing = 1, kAccelerate = 2 };
inline constexpr std::size_t kActionCount = 3;
const char* action_name(Action a);

struct AgentConfig {
  double gamma = 1.0;
  float entropy_beta = 0.01f;
  int v_max = 20;
  int omega_max = 5;
  float policy_lr = 1e-5f;
  float value_lr = 1e-3f;
  std::size_t epochs = 100;
  std::vector<std::size_t> hidden{256, 128};

  // Desk-scale settings for the synthetic benchmark.
  static AgentConfig toy();
  void validate() const;
};

struct NavState {
  std::size_t frame = 0;
  int velocity = 1;
  int acceleration = 1;
};

struct StepOutcome {
  NavState next;
  bool ended = false;  // the pointer passed the last frame; nothing selected
};

// Velocity first (using the current acceleration), then acceleration; both
// clamped to [1, max]. The pointer then advances by the new velocity.
StepOutcome step_env(const NavState& nav, Action action, std::size_t video_length,
                     int v_max = 20, int omega_max = 5);

double compute_reward(std::span<const float> e_doc, std::span<const float> e_img);
std::vector<double> compute_returns(std::span<const double> rewards, double gamma);
// -sum p log p, with 0 log 0 = 0.
double entropy(std::span<const double> dist);

class Agent {
 public:
  Agent(std::size_t embedding_dim, const AgentConfig& config, Rng& init_rng);

  std::size_t observation_dim() const { return 2 * embedding_dim_; }
  const AgentConfig& config() const { return config_; }

  ParameterSet& policy_parameters() { return policy_params_; }
  const ParameterSet& policy_parameters() const { return policy_params_; }
  ParameterSet& value_parameters() { return value_params_; }
  const ParameterSet& value_parameters() const { return value_params_; }
  // Both sets under their "policy." / "value." names, for checkpoints.
  ParameterSet all_parameters() const;

  const nn::Mlp& policy_network() const { return policy_; }
  const nn::Mlp& value_network() const { return value_; }

  Tensor policy_logits(const Tensor& observation) const;
  Tensor policy_forward(const Tensor& observation) const;  // probabilities
  Tensor value_forward(const Tensor& observation) const;   // shape [1]

 private:
  void check(const Tensor& observation) const;

  std::size_t embedding_dim_;
  AgentConfig config_;
  nn::Mlp policy_;
  nn::Mlp value_;
  ParameterSet policy_params_;
  ParameterSet value_params_;
};

// [e_doc; e_img]
Tensor make_observation(std::span<const float> e_doc, std::span<const float> e_img);

struct TrajectoryStep {
  std::vector<float> observation;
  Action action = Action::kDoNothing;
  double reward = 0.0;  // similarity of the frame selected at this step
  std::size_t frame = 0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::vector<double> returns;

  std::vector<std::size_t> frames() const;
  std::vector<double> rewards() const;
  double total_reward() const;
};

enum class RolloutMode { kSample, kGreedy };

// Embedding e_I of frame i; called once per visited frame.
using FrameEmbeddings = std::function<std::vector<float>(std::size_t)>;
// Chooses the action for an observation.
using ActionChooser = std::function<Action(const Tensor& observation)>;

// Starts at frame 0 with v = w = 1. Each step records the observation at
// the current frame, its reward and the chosen action, then moves. The
// episode ends when the pointer passes the last frame. Returns are filled
// in with the configured discount.
Trajectory rollout(std::size_t video_length, std::span<const float> e_doc,
                   const FrameEmbeddings& frames, const ActionChooser& choose,
                   const AgentConfig& config);
Trajectory rollout(std::size_t video_length, std::span<const float> e_doc,
                   const FrameEmbeddings& frames, const Agent& agent, RolloutMode mode,
                   Rng& rng);

Action greedy_action(const Tensor& probabilities);

// -sum_t log pi(a_t|s_t) (R_t - b_t) - beta sum_t H(pi(.|s_t)); the
// baselines b_t enter as constants.
Tensor policy_loss(const Agent& agent, const Trajectory& traj,
                   std::span<const double> baselines, float beta);
// sum_t (v(s_t) - R_t)^2
Tensor value_loss(const Agent& agent, const Trajectory& traj);
std::vector<double> baselines(const Agent& agent, const Trajectory& traj);

struct Optimizers {
  AdamState policy;
  AdamState value;
  explicit Optimizers(const AgentConfig& config)
      : policy(AdamConfig{config.policy_lr}), value(AdamConfig{config.value_lr}) {}
};

struct UpdateResult {
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

// One Adam step on each network from a single episode.
UpdateResult reinforce_update(Agent& agent, const Trajectory& traj, Optimizers& opt);

struct TrainingVideo {
  std::vector<std::vector<float>> frame_embeddings;
  std::vector<float> e_doc;
};

struct AgentEpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_return = 0.0;
  double mean_selected = 0.0;
};

std::vector<AgentEpochLog> train_agent(
    Agent& agent, std::span<const TrainingVideo> videos, Rng& rng,
    const std::function<void(const AgentEpochLog&)>& on_epoch = {});

// Feature vector used to seed the document encoder for a whole video: the
// mean of its frame features.
std::vector<float> video_feature(std::span<const float> features, std::size_t dim);

// Document embedding plus per-frame image embeddings for a video.
TrainingVideo embed_video(const vdan::Vdan& model, std::span<const float> features,
                          std::size_t dim, const Document& document);

// Greedy fast-forward: encodes the document once, frames on demand.
std::vector<std::size_t> fast_forward(const vdan::Vdan& model, const Agent& agent,
                                      std::span<const float> features, std::size_t dim,
                                      const Document& document);

}  // namespace sff::agent

#endif  // SFF_AGENT_HPP
