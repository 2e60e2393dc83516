#include "sff/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "sff/errors.hpp"
#include "sff/ops.hpp"

namespace sff::agent {
namespace o = sff::ops;

const char* action_name(Action a) {
  switch (a) {
    case Action::kDecelerate: return "decelerate";
    case Action::kDoNothing: return "do_nothing";
    case Action::kAccelerate: return "accelerate";
  }
  return "?";
}

AgentConfig AgentConfig::toy() {
  AgentConfig c;
  c.policy_lr = 3e-4f;
  return c;
}

void AgentConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("agent: gamma must be in (0, 1]");
  if (!(entropy_beta >= 0.0f)) throw ConfigError("agent: entropy beta must be >= 0");
  if (v_max < 1 || omega_max < 1) throw ConfigError("agent: v_max and omega_max must be >= 1");
  if (!(policy_lr > 0.0f) || !(value_lr > 0.0f))
    throw ConfigError("agent: learning rates must be positive");
  if (epochs == 0) throw ConfigError("agent: epochs must be positive");
  if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0u) != hidden.end())
    throw ConfigError("agent: hidden layer sizes must be positive");
}

StepOutcome step_env(const NavState& nav, Action action, std::size_t video_length,
                     int v_max, int omega_max) {
  int v = nav.velocity, w = nav.acceleration;
  if (action == Action::kAccelerate) {
    v += w;
    w += 1;
  } else if (action == Action::kDecelerate) {
    v -= w;
    w -= 1;
  }
  StepOutcome out;
  out.next.velocity = std::clamp(v, 1, v_max);
  out.next.acceleration = std::clamp(w, 1, omega_max);
  out.next.frame = nav.frame + static_cast<std::size_t>(out.next.velocity);
  out.ended = out.next.frame >= video_length;
  return out;
}

double compute_reward(std::span<const float> e_doc, std::span<const float> e_img) {
  if (e_doc.size() != e_img.size())
    throw ShapeError("compute_reward: embeddings have sizes " + std::to_string(e_doc.size()) +
                     " and " + std::to_string(e_img.size()));
  double r = 0.0;
  for (std::size_t i = 0; i < e_doc.size(); ++i)
    r += static_cast<double>(e_doc[i]) * static_cast<double>(e_img[i]);
  return r;
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw std::invalid_argument("compute_returns: empty reward list");
  std::vector<double> R(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    R[t] = acc;
  }
  return R;
}

double entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

// ---- Networks ------------------------------------------------------------

Agent::Agent(std::size_t embedding_dim, const AgentConfig& config, Rng& init_rng)
    : embedding_dim_(embedding_dim), config_(config) {
  config_.validate();
  if (embedding_dim == 0) throw ConfigError("agent: embedding dimension must be positive");
  std::vector<std::size_t> sizes{2 * embedding_dim};
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(kActionCount);
  policy_ = nn::Mlp::init(sizes, init_rng);
  sizes.back() = 1;
  value_ = nn::Mlp::init(sizes, init_rng);
  policy_.register_in(policy_params_, "policy");
  value_.register_in(value_params_, "value");
}

ParameterSet Agent::all_parameters() const {
  ParameterSet all;
  all.extend(policy_params_);
  all.extend(value_params_);
  return all;
}

void Agent::check(const Tensor& observation) const {
  if (observation.rank() != 1 || observation.size() != observation_dim())
    throw ShapeError("agent: observation has shape " + shape_string(observation.shape()) +
                     ", expected [" + std::to_string(observation_dim()) + "]");
}

Tensor Agent::policy_logits(const Tensor& observation) const {
  check(observation);
  return policy_(observation);
}

Tensor Agent::policy_forward(const Tensor& observation) const {
  return o::softmax(policy_logits(observation));
}

Tensor Agent::value_forward(const Tensor& observation) const {
  check(observation);
  return value_(observation);
}

Tensor make_observation(std::span<const float> e_doc, std::span<const float> e_img) {
  std::vector<float> s(e_doc.begin(), e_doc.end());
  s.insert(s.end(), e_img.begin(), e_img.end());
  return Tensor::vector(s);
}

// ---- Trajectories ----------------------------------------------------------

std::vector<std::size_t> Trajectory::frames() const {
  std::vector<std::size_t> f;
  f.reserve(steps.size());
  for (const auto& s : steps) f.push_back(s.frame);
  return f;
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> r;
  r.reserve(steps.size());
  for (const auto& s : steps) r.push_back(s.reward);
  return r;
}

double Trajectory::total_reward() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.reward;
  return total;
}

Trajectory rollout(std::size_t video_length, std::span<const float> e_doc,
                   const FrameEmbeddings& frames, const ActionChooser& choose,
                   const AgentConfig& config) {
  if (video_length == 0) throw DataError("rollout: empty video");
  Trajectory traj;
  NavState nav;
  while (true) {
    const auto e_img = frames(nav.frame);
    TrajectoryStep step;
    step.frame = nav.frame;
    step.reward = compute_reward(e_doc, e_img);
    Tensor obs = make_observation(e_doc, e_img);
    step.action = choose(obs);
    step.observation = obs.values();
    traj.steps.push_back(std::move(step));
    const auto out = step_env(nav, traj.steps.back().action, video_length, config.v_max,
                              config.omega_max);
    if (out.ended) break;
    nav = out.next;
  }
  traj.returns = compute_returns(traj.rewards(), config.gamma);
  return traj;
}

Action greedy_action(const Tensor& probabilities) {
  const auto p = probabilities.data();
  return static_cast<Action>(std::max_element(p.begin(), p.end()) - p.begin());
}

Trajectory rollout(std::size_t video_length, std::span<const float> e_doc,
                   const FrameEmbeddings& frames, const Agent& agent, RolloutMode mode,
                   Rng& rng) {
  const ActionChooser choose = [&](const Tensor& obs) {
    NoGradScope no_grad;
    Tensor probs = agent.policy_forward(obs);
    if (mode == RolloutMode::kGreedy) return greedy_action(probs);
    const auto p = probs.data();
    std::discrete_distribution<int> dist(p.begin(), p.end());
    return static_cast<Action>(dist(rng));
  };
  return rollout(video_length, e_doc, frames, choose, agent.config());
}

// ---- Losses and updates ----------------------------------------------------

namespace {
Tensor observation_tensor(const TrajectoryStep& step) {
  return Tensor::vector(step.observation);
}

void check_trajectory(const Trajectory& traj) {
  if (traj.steps.empty()) throw std::invalid_argument("agent: empty trajectory");
  if (traj.returns.size() != traj.steps.size())
    throw std::invalid_argument("agent: trajectory returns have not been computed");
}
}  // namespace

std::vector<double> baselines(const Agent& agent, const Trajectory& traj) {
  NoGradScope no_grad;
  std::vector<double> b;
  b.reserve(traj.steps.size());
  for (const auto& step : traj.steps) b.push_back(agent.value_forward(observation_tensor(step)).item());
  return b;
}

Tensor policy_loss(const Agent& agent, const Trajectory& traj, std::span<const double> base,
                   float beta) {
  check_trajectory(traj);
  if (base.size() != traj.steps.size())
    throw std::invalid_argument("policy_loss: one baseline per step is required");
  Tensor total;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& step = traj.steps[t];
    Tensor logits = agent.policy_logits(observation_tensor(step));
    Tensor logp = o::log_softmax(logits);
    Tensor probs = o::softmax(logits);
    const float advantage = static_cast<float>(traj.returns[t] - base[t]);
    Tensor pg = o::affine(o::pick(logp, static_cast<std::size_t>(step.action)), -advantage, 0.0f);
    // -beta * H = beta * sum p log p
    Tensor ent = o::affine(o::sum(o::mul(probs, logp)), beta, 0.0f);
    Tensor term = o::add(pg, ent);
    total = t == 0 ? term : o::add(total, term);
  }
  return total;
}

Tensor value_loss(const Agent& agent, const Trajectory& traj) {
  check_trajectory(traj);
  Tensor total;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    Tensor v = agent.value_forward(observation_tensor(traj.steps[t]));
    Tensor err = o::square(o::affine(v, 1.0f, -static_cast<float>(traj.returns[t])));
    total = t == 0 ? err : o::add(total, err);
  }
  return total;
}

UpdateResult reinforce_update(Agent& agent, const Trajectory& traj, Optimizers& opt) {
  check_trajectory(traj);
  const auto base = baselines(agent, traj);
  UpdateResult result;
  {
    auto& params = agent.policy_parameters();
    params.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = policy_loss(agent, traj, base, agent.config().entropy_beta);
    result.policy_loss = loss.item();
    if (!std::isfinite(result.policy_loss)) throw NumericError("agent: non-finite policy loss");
    backward(tape, loss);
    auto tensors = params.tensors();
    adam_step(tensors, opt.policy);
  }
  {
    auto& params = agent.value_parameters();
    params.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = value_loss(agent, traj);
    result.value_loss = loss.item();
    if (!std::isfinite(result.value_loss)) throw NumericError("agent: non-finite value loss");
    backward(tape, loss);
    auto tensors = params.tensors();
    adam_step(tensors, opt.value);
  }
  return result;
}

std::vector<AgentEpochLog> train_agent(Agent& agent, std::span<const TrainingVideo> videos,
                                       Rng& rng,
                                       const std::function<void(const AgentEpochLog&)>& on_epoch) {
  if (videos.empty()) throw DataError("train_agent: no training videos");
  for (const auto& v : videos) {
    if (v.frame_embeddings.empty()) throw DataError("train_agent: empty video");
    if (v.e_doc.size() * 2 != agent.observation_dim())
      throw ShapeError("train_agent: document embedding has the wrong size");
  }
  Optimizers opt(agent.config());
  std::vector<AgentEpochLog> log;
  for (std::size_t epoch = 1; epoch <= agent.config().epochs; ++epoch) {
    AgentEpochLog entry;
    entry.epoch = epoch;
    for (const auto& video : videos) {
      const FrameEmbeddings frames = [&](std::size_t i) { return video.frame_embeddings.at(i); };
      const auto traj = rollout(video.frame_embeddings.size(), video.e_doc, frames, agent,
                                RolloutMode::kSample, rng);
      try {
        reinforce_update(agent, traj, opt);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
      }
      entry.mean_return += traj.returns.front();
      entry.mean_selected += static_cast<double>(traj.steps.size());
    }
    entry.mean_return /= static_cast<double>(videos.size());
    entry.mean_selected /= static_cast<double>(videos.size());
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

// ---- Inference -------------------------------------------------------------

namespace {
void check_features(std::span<const float> features, std::size_t dim) {
  if (dim == 0) throw DataError("video: feature dimension is 0");
  if (features.empty()) throw DataError("video: no frames");
  if (features.size() % dim != 0)
    throw DataError("video: feature values are not a whole number of frames");
}
}  // namespace

std::vector<float> video_feature(std::span<const float> features, std::size_t dim) {
  check_features(features, dim);
  const std::size_t n = features.size() / dim;
  std::vector<double> acc(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) acc[d] += features[i * dim + d];
  std::vector<float> mean(dim);
  for (std::size_t d = 0; d < dim; ++d) mean[d] = static_cast<float>(acc[d] / static_cast<double>(n));
  return mean;
}

namespace {
std::vector<float> document_embedding(const vdan::Vdan& model, std::span<const float> features,
                                      std::size_t dim, const Document& document) {
  if (document.sentences.empty()) throw DataError("fast_forward: empty document");
  document.validate();
  NoGradScope no_grad;
  const auto seed = video_feature(features, dim);
  return model.encode_document(document, seed).embedding.values();
}
}  // namespace

TrainingVideo embed_video(const vdan::Vdan& model, std::span<const float> features,
                          std::size_t dim, const Document& document) {
  TrainingVideo video;
  video.e_doc = document_embedding(model, features, dim, document);
  NoGradScope no_grad;
  const std::size_t n = features.size() / dim;
  video.frame_embeddings.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    video.frame_embeddings.push_back(model.encode_image(features.subspan(i * dim, dim)).values());
  return video;
}

std::vector<std::size_t> fast_forward(const vdan::Vdan& model, const Agent& agent,
                                      std::span<const float> features, std::size_t dim,
                                      const Document& document) {
  const auto e_doc = document_embedding(model, features, dim, document);
  if (e_doc.size() * 2 != agent.observation_dim())
    throw ShapeError("fast_forward: embedding size does not match the agent");
  const FrameEmbeddings frames = [&](std::size_t i) {
    NoGradScope no_grad;
    return model.encode_image(features.subspan(i * dim, dim)).values();
  };
  Rng unused(0);
  const auto traj = rollout(features.size() / dim, e_doc, frames, agent, RolloutMode::kGreedy, unused);
  return traj.frames();
}

}  // namespace sff::agent
