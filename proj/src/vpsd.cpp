#include "specdeck/vpsd.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <queue>
#include <stdexcept>
#include <thread>

namespace specdeck {

namespace {

struct Drafted {
  TokenId tok;
  ProbDist dist;
  double ready;
};

void check_args(std::span<const TokenId> prompt, int gamma, int max_new) {
  if (prompt.empty()) throw std::invalid_argument("run_vpsd: prompt must be non-empty");
  if (gamma < 1) throw std::invalid_argument("run_vpsd: gamma must be >= 1");
  if (max_new < 1) throw std::invalid_argument("run_vpsd: max_new must be >= 1");
}

// ---------------------------------------------------------------------------
// Virtual-clock executor: single-threaded reference semantics.
// ---------------------------------------------------------------------------

class VirtualScheduler {
 public:
  VirtualScheduler(const ModelOracle& draft, const ModelOracle& target,
                   std::span<const TokenId> prompt, int gamma,
                   const LatencyProfile& profile, const SeededRng& rng,
                   DecodeMode mode, bool speculate)
      : draft_(draft),
        target_(target),
        gamma_(gamma),
        profile_(profile),
        rng_(rng),
        draft_stream_(rng.split(kDraftStream)),
        decode_mode_(mode),
        speculate_(speculate),
        committed_(prompt.begin(), prompt.end()),
        prompt_len_(prompt.size()) {
    profile.validate();
    draft_ctx_ = committed_;
  }

  VpsdResult run(int max_new) {
    sync_prefill();
    while (committed_new() < max_new) {
      if (mode_ == SchedMode::optimistic) {
        step_optimistic();
      } else {
        step_conservative();
      }
    }
    VpsdResult result;
    committed_.resize(prompt_len_ + static_cast<size_t>(max_new));
    result.tokens.assign(committed_.begin() + static_cast<long>(prompt_len_),
                         committed_.end());
    result.log = std::move(log_);
    result.trace = std::move(trace_);
    result.prefill_buffer_tokens = prefill_tokens_;
    return result;
  }

 private:
  int committed_new() const {
    return static_cast<int>(committed_.size() - prompt_len_);
  }

  // Both models prefill from time zero; the draft side runs pruning first,
  // then its prefill, then decodes the headroom buffer while the target is
  // still prefilling.
  void sync_prefill() {
    double t = 0.0;
    if (profile_.t_prune > 0.0) {
      trace_.events.push_back({Worker::draft, TraceAction::prune, 0.0, profile_.t_prune});
      t = profile_.t_prune;
    }
    trace_.events.push_back(
        {Worker::draft, TraceAction::prefill, t, t + profile_.t_draft_prefill});
    t_draft_ = t + profile_.t_draft_prefill;
    trace_.events.push_back(
        {Worker::target, TraceAction::prefill, 0.0, profile_.t_target_prefill});
    t_target_ = profile_.t_target_prefill;

    prefill_tokens_ = profile_.t_draft_decode > 0.0 ? prefill_buffer(profile_) : 0;
    for (int i = 0; i < prefill_tokens_; ++i) buffer_.push_back(draft_next(0.0));
    mode_ = prefill_tokens_ >= 1 ? SchedMode::optimistic : SchedMode::conservative;
  }

  Drafted draft_next(double start_floor) {
    ProbDist dist = draft_.next_dist(draft_ctx_);
    TokenId tok;
    if (decode_mode_ == DecodeMode::greedy) {
      tok = argmax_token(dist);
    } else {
      draft_stream_.seek(draft_ctx_.size());
      tok = sample(dist, draft_stream_);
    }
    const double start = std::max(t_draft_, start_floor);
    const double end = start + profile_.t_draft_decode;
    trace_.events.push_back({Worker::draft, TraceAction::decode_one, start, end});
    t_draft_ = end;
    draft_ctx_.push_back(tok);
    return Drafted{tok, std::move(dist), end};
  }

  // The verdict lands at time `at`: every unverified draft token dies and
  // the draft worker resynchronizes to the committed sequence. Decodes still
  // running at `at` are truncated there.
  void discard_unverified(double at, bool force_abort_marker) {
    bool clipped = false;
    for (size_t i = trace_.events.size(); i-- > 0;) {
      auto& e = trace_.events[i];
      if (e.worker != Worker::draft || e.action != TraceAction::decode_one) continue;
      if (e.end <= at) break;  // earlier decodes were all verified or idle
      if (e.start >= at) {
        trace_.events.erase(trace_.events.begin() + static_cast<long>(i));
      } else {
        e.end = at;
      }
      clipped = true;
    }
    if (force_abort_marker || clipped) {
      trace_.events.push_back({Worker::draft, TraceAction::abort_draft, at, at});
    }
    buffer_.clear();
    draft_ctx_ = committed_;
    t_draft_ = at;
  }

  void record_verify(int gamma_used, const VerifyOutcome& out, double start,
                     double end, SchedMode mode) {
    TraceEvent e;
    e.worker = Worker::target;
    e.action = TraceAction::verify_batch;
    e.start = start;
    e.end = end;
    e.round = round_++;
    e.gamma_used = gamma_used;
    e.accepted = out.accepted;
    e.emitted = static_cast<int>(out.emitted.size());
    e.mode = mode;
    trace_.events.push_back(e);
    log_.rounds.push_back(
        RoundRecord{gamma_used, out.accepted, static_cast<int>(out.emitted.size())});
  }

  void commit(const VerifyOutcome& out) {
    committed_.insert(committed_.end(), out.emitted.begin(), out.emitted.end());
  }

  void step_optimistic() {
    if (buffer_.empty()) {
      // Fresh batch from the committed context; its first decode cannot
      // start before the verdict that produced that context.
      for (int i = 0; i < gamma_; ++i) {
        buffer_.push_back(draft_next(i == 0 ? t_target_ : 0.0));
      }
    }
    const int b = static_cast<int>(std::min<size_t>(gamma_, buffer_.size()));
    if (speculate_) {
      // One batch of lookahead beyond the batch under verification.
      while (static_cast<int>(buffer_.size()) - b < gamma_) {
        buffer_.push_back(draft_next(0.0));
      }
    }

    std::vector<TokenId> tokens;
    std::vector<ProbDist> dists;
    for (int i = 0; i < b; ++i) {
      tokens.push_back(buffer_[i].tok);
      dists.push_back(buffer_[i].dist);
    }
    const double start = std::max(t_target_, buffer_[b - 1].ready);
    const double end = start + profile_.t_target_verify;
    const VerifyOutcome out = verify_batch(target_, committed_, tokens, dists,
                                           rng_, decode_mode_, /*bonus_on_full=*/true);
    record_verify(b, out, start, end, SchedMode::optimistic);
    t_target_ = end;
    commit(out);

    if (out.accepted == b) {
      buffer_.erase(buffer_.begin(), buffer_.begin() + b);
      const TokenId bonus = out.emitted.back();
      if (!buffer_.empty()) {
        if (buffer_.front().tok == bonus) {
          // The speculative continuation starts with the bonus token: the
          // lookahead survives and that token is already committed.
          buffer_.pop_front();
        } else {
          discard_unverified(end, false);
        }
      } else {
        // Nothing drafted beyond the batch; the draft resyncs on the bonus.
        discard_unverified(end, false);
      }
    } else {
      discard_unverified(end, false);
      mode_ = SchedMode::conservative;
    }
  }

  void step_conservative() {
    // buffer_ is empty on every conservative entry.
    const Drafted x1 = draft_next(0.0);
    std::vector<Drafted> rest;
    rest.reserve(static_cast<size_t>(gamma_ - 1));
    for (int i = 1; i < gamma_; ++i) rest.push_back(draft_next(0.0));

    const double start = std::max(t_target_, x1.ready);
    const double end = start + profile_.t_target_verify;
    const std::vector<TokenId> t1{x1.tok};
    const std::vector<ProbDist> d1{x1.dist};
    // With gamma == 1 the single token is the whole batch and nothing is in
    // flight behind it, so the standard bonus applies; otherwise the rest of
    // the batch was drafted on x1 alone and a bonus would invalidate it.
    const VerifyOutcome out1 = verify_batch(target_, committed_, t1, d1, rng_,
                                            decode_mode_, /*bonus_on_full=*/gamma_ == 1);
    record_verify(1, out1, start, end, SchedMode::conservative);
    t_target_ = end;
    commit(out1);

    if (out1.accepted == 0) {
      discard_unverified(end, /*force_abort_marker=*/true);
      return;  // stays conservative
    }
    if (gamma_ == 1) {
      mode_ = SchedMode::optimistic;
      discard_unverified(end, false);
      return;
    }

    // x1 accepted: the remaining tokens proceed to standard verification
    // while the draft idles.
    std::vector<TokenId> tokens;
    std::vector<ProbDist> dists;
    for (auto& d : rest) {
      tokens.push_back(d.tok);
      dists.push_back(d.dist);
    }
    const double start_b = std::max(t_target_, rest.back().ready);
    const double end_b = start_b + profile_.t_target_verify;
    const VerifyOutcome out_b = verify_batch(target_, committed_, tokens, dists,
                                             rng_, decode_mode_, /*bonus_on_full=*/true);
    record_verify(gamma_ - 1, out_b, start_b, end_b, SchedMode::conservative);
    t_target_ = end_b;
    commit(out_b);
    mode_ = out_b.accepted == gamma_ - 1 ? SchedMode::optimistic
                                         : SchedMode::conservative;
    discard_unverified(end_b, false);
  }

  const ModelOracle& draft_;
  const ModelOracle& target_;
  const int gamma_;
  const LatencyProfile profile_;
  const SeededRng rng_;
  SeededRng draft_stream_;
  const DecodeMode decode_mode_;
  const bool speculate_;

  std::vector<TokenId> committed_;
  const size_t prompt_len_;
  std::vector<TokenId> draft_ctx_;  // committed + buffered draft tokens
  std::deque<Drafted> buffer_;
  SchedMode mode_ = SchedMode::conservative;
  double t_draft_ = 0.0;
  double t_target_ = 0.0;
  int round_ = 0;
  int prefill_tokens_ = 0;
  RoundLog log_;
  ScheduleTrace trace_;
};

// ---------------------------------------------------------------------------
// Two-worker executor: a real draft thread plus the coordinator thread,
// which also runs the target's verification passes. The workers exchange
// messages over two single-producer single-consumer queues (draft directives
// out, drafted tokens back); the only other shared state is the atomic
// cancellation watermark the draft checks between single-token decodes.
// ---------------------------------------------------------------------------

template <typename T>
class SpscQueue {
 public:
  void push(T value) {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      items_.push(std::move(value));
    }
    ready_.notify_one();
  }

  T pop() {
    std::unique_lock<std::mutex> lock(mutex_);
    ready_.wait(lock, [&] { return !items_.empty(); });
    T value = std::move(items_.front());
    items_.pop();
    return value;
  }

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::queue<T> items_;
};

struct DraftDirective {
  int id = 0;
  int count = 0;  // negative count shuts the worker down
  std::vector<TokenId> context;
};

struct DraftReply {
  int id = 0;
  bool done = false;
  bool aborted = false;
  TokenId tok = 0;
  std::optional<ProbDist> dist;
};

class ThreadedScheduler {
 public:
  ThreadedScheduler(const ModelOracle& draft, const ModelOracle& target,
                    std::span<const TokenId> prompt, int gamma,
                    const LatencyProfile& profile, const SeededRng& rng,
                    DecodeMode mode, bool speculate)
      : draft_(draft),
        target_(target),
        gamma_(gamma),
        profile_(profile),
        rng_(rng),
        decode_mode_(mode),
        speculate_(speculate),
        committed_(prompt.begin(), prompt.end()),
        prompt_len_(prompt.size()),
        start_time_(std::chrono::steady_clock::now()) {
    profile.validate();
  }

  VpsdResult run(int max_new) {
    std::thread worker([this] { draft_worker(); });
    try {
      sync_prefill();
      while (committed_new() < max_new) {
        if (mode_ == SchedMode::optimistic) {
          step_optimistic();
        } else {
          step_conservative();
        }
      }
    } catch (...) {
      directives_.push(DraftDirective{0, -1, {}});
      worker.join();
      throw;
    }
    directives_.push(DraftDirective{0, -1, {}});
    worker.join();

    VpsdResult result;
    committed_.resize(prompt_len_ + static_cast<size_t>(max_new));
    result.tokens.assign(committed_.begin() + static_cast<long>(prompt_len_),
                         committed_.end());
    result.log = std::move(log_);
    auto events = std::move(coordinator_events_);
    events.insert(events.end(), worker_events_.begin(), worker_events_.end());
    std::stable_sort(events.begin(), events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) {
                       return a.start < b.start;
                     });
    result.trace.events = std::move(events);
    result.prefill_buffer_tokens = prefill_tokens_;
    return result;
  }

 private:
  double now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_time_)
        .count();
  }

  int committed_new() const {
    return static_cast<int>(committed_.size() - prompt_len_);
  }

  void draft_worker() {
    SeededRng draft_stream = rng_.split(kDraftStream);
    for (;;) {
      DraftDirective d = directives_.pop();
      if (d.count < 0) return;
      std::vector<TokenId> ctx = std::move(d.context);
      bool aborted = false;
      for (int i = 0; i < d.count; ++i) {
        if (cancel_watermark_.load(std::memory_order_acquire) >= d.id) {
          aborted = true;
          break;
        }
        const double t0 = now();
        ProbDist dist = draft_.next_dist(ctx);
        TokenId tok;
        if (decode_mode_ == DecodeMode::greedy) {
          tok = argmax_token(dist);
        } else {
          draft_stream.seek(ctx.size());
          tok = sample(dist, draft_stream);
        }
        worker_events_.push_back(
            {Worker::draft, TraceAction::decode_one, t0, now()});
        ctx.push_back(tok);
        replies_.push(DraftReply{d.id, false, false, tok, std::move(dist)});
      }
      if (aborted) {
        const double t = now();
        worker_events_.push_back({Worker::draft, TraceAction::abort_draft, t, t});
      }
      replies_.push(DraftReply{d.id, true, aborted, 0, std::nullopt});
    }
  }

  int issue(int count, std::vector<TokenId> context) {
    const int id = ++next_directive_;
    directives_.push(DraftDirective{id, count, std::move(context)});
    return id;
  }

  std::vector<TokenId> drafting_context() const {
    std::vector<TokenId> ctx = committed_;
    for (const auto& d : buffer_) ctx.push_back(d.tok);
    return ctx;
  }

  // Pops replies for `id` until the end marker, appending tokens to out.
  void collect(int id, std::vector<Drafted>* out) {
    for (;;) {
      DraftReply r = replies_.pop();
      if (r.id != id) continue;  // stale replies from a cancelled directive
      if (r.done) return;
      if (out != nullptr) out->push_back(Drafted{r.tok, std::move(*r.dist), 0.0});
    }
  }

  void cancel_and_drain(int id) {
    cancel_watermark_.store(id, std::memory_order_release);
    collect(id, nullptr);
  }

  void record_verify(int gamma_used, const VerifyOutcome& out, double start,
                     double end, SchedMode mode) {
    TraceEvent e;
    e.worker = Worker::target;
    e.action = TraceAction::verify_batch;
    e.start = start;
    e.end = end;
    e.round = round_++;
    e.gamma_used = gamma_used;
    e.accepted = out.accepted;
    e.emitted = static_cast<int>(out.emitted.size());
    e.mode = mode;
    coordinator_events_.push_back(e);
    log_.rounds.push_back(
        RoundRecord{gamma_used, out.accepted, static_cast<int>(out.emitted.size())});
  }

  VerifyOutcome verified(std::span<const Drafted> batch, bool bonus_on_full,
                         SchedMode mode) {
    std::vector<TokenId> tokens;
    std::vector<ProbDist> dists;
    for (const auto& d : batch) {
      tokens.push_back(d.tok);
      dists.push_back(d.dist);
    }
    const double t0 = now();
    VerifyOutcome out = verify_batch(target_, committed_, tokens, dists, rng_,
                                     decode_mode_, bonus_on_full);
    record_verify(static_cast<int>(batch.size()), out, t0, now(), mode);
    committed_.insert(committed_.end(), out.emitted.begin(), out.emitted.end());
    return out;
  }

  void sync_prefill() {
    // No model weights to load here; the prefill events are shape markers so
    // the trace structure matches the virtual executor's.
    const double t0 = now();
    coordinator_events_.push_back({Worker::target, TraceAction::prefill, t0, now()});
    coordinator_events_.push_back({Worker::draft, TraceAction::prefill, t0, t0});
    prefill_tokens_ = profile_.t_draft_decode > 0.0 ? prefill_buffer(profile_) : 0;
    if (prefill_tokens_ > 0) {
      const int id = issue(prefill_tokens_, committed_);
      collect(id, &pending_collect_);
      for (auto& d : pending_collect_) buffer_.push_back(std::move(d));
      pending_collect_.clear();
    }
    mode_ = prefill_tokens_ >= 1 ? SchedMode::optimistic : SchedMode::conservative;
  }

  void step_optimistic() {
    if (buffer_.empty()) {
      const int id = issue(gamma_, committed_);
      pending_collect_.clear();
      collect(id, &pending_collect_);
      for (auto& d : pending_collect_) buffer_.push_back(std::move(d));
      pending_collect_.clear();
    }
    const int b = static_cast<int>(std::min<size_t>(gamma_, buffer_.size()));
    int spec_id = 0;
    int need = 0;
    if (speculate_) {
      need = gamma_ - (static_cast<int>(buffer_.size()) - b);
      if (need > 0) spec_id = issue(need, drafting_context());
    }

    std::vector<Drafted> batch(buffer_.begin(), buffer_.begin() + b);
    const VerifyOutcome out =
        verified(batch, /*bonus_on_full=*/true, SchedMode::optimistic);

    if (out.accepted == b) {
      if (need > 0) {
        pending_collect_.clear();
        collect(spec_id, &pending_collect_);
        for (auto& d : pending_collect_) buffer_.push_back(std::move(d));
        pending_collect_.clear();
      }
      buffer_.erase(buffer_.begin(), buffer_.begin() + b);
      const TokenId bonus = out.emitted.back();
      if (!buffer_.empty() && buffer_.front().tok == bonus) {
        buffer_.pop_front();
      } else {
        buffer_.clear();
      }
    } else {
      if (need > 0) cancel_and_drain(spec_id);
      buffer_.clear();
      mode_ = SchedMode::conservative;
    }
  }

  void step_conservative() {
    const int id = issue(gamma_, committed_);
    // First token arrives as soon as the worker produces it; verification of
    // it overlaps the drafting of the remainder.
    std::vector<Drafted> head;
    for (;;) {
      DraftReply r = replies_.pop();
      if (r.id != id) continue;
      if (r.done) {
        throw std::logic_error("vpsd: draft worker ended a directive early");
      }
      head.push_back(Drafted{r.tok, std::move(*r.dist), 0.0});
      break;
    }

    std::vector<Drafted> x1(head.begin(), head.begin() + 1);
    const VerifyOutcome out1 =
        verified(x1, /*bonus_on_full=*/gamma_ == 1, SchedMode::conservative);

    if (out1.accepted == 0) {
      cancel_and_drain(id);
      buffer_.clear();
      return;  // stays conservative
    }
    if (gamma_ == 1) {
      collect(id, nullptr);  // consume the end marker
      mode_ = SchedMode::optimistic;
      return;
    }

    std::vector<Drafted> rest(head.begin() + 1, head.end());
    collect(id, &rest);
    const VerifyOutcome out_b =
        verified(rest, /*bonus_on_full=*/true, SchedMode::conservative);
    mode_ = out_b.accepted == gamma_ - 1 ? SchedMode::optimistic
                                         : SchedMode::conservative;
  }

  const ModelOracle& draft_;
  const ModelOracle& target_;
  const int gamma_;
  const LatencyProfile profile_;
  const SeededRng rng_;
  const DecodeMode decode_mode_;
  const bool speculate_;

  std::vector<TokenId> committed_;
  const size_t prompt_len_;
  std::deque<Drafted> buffer_;
  std::vector<Drafted> pending_collect_;
  SchedMode mode_ = SchedMode::conservative;
  int round_ = 0;
  int prefill_tokens_ = 0;
  int next_directive_ = 0;
  RoundLog log_;

  SpscQueue<DraftDirective> directives_;
  SpscQueue<DraftReply> replies_;
  std::atomic<int> cancel_watermark_{0};

  std::vector<TraceEvent> coordinator_events_;
  std::vector<TraceEvent> worker_events_;
  std::chrono::steady_clock::time_point start_time_;
};

}  // namespace

VpsdResult run_vpsd(const ModelOracle& draft_model,
                    const ModelOracle& target_model,
                    std::span<const TokenId> prompt, int gamma, int max_new,
                    const LatencyProfile& profile, const SeededRng& rng,
                    DecodeMode mode, const VpsdOptions& options) {
  check_args(prompt, gamma, max_new);
  if (options.executor == VpsdExecutor::virtual_clock) {
    VirtualScheduler sched(draft_model, target_model, prompt, gamma, profile,
                           rng, mode, options.speculate);
    return sched.run(max_new);
  }
  ThreadedScheduler sched(draft_model, target_model, prompt, gamma, profile,
                          rng, mode, options.speculate);
  return sched.run(max_new);
}

}  // namespace specdeck
