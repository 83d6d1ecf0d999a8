#include <gtest/gtest.h>

#include <mutex>
#include <set>
#include <thread>

#include "ironia/review.hpp"
#include "support.hpp"

using namespace ironia;
using ironia::testing::annotated;
using ironia::testing::paired_columns;
using ironia::testing::resolve_all;
using ironia::testing::TempDir;
using ironia::testing::verdict_for;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an ironia::Error";
  return ErrorCode::ContractViolation;
}

struct FakeClock {
  std::shared_ptr<std::atomic<Millis>> now = std::make_shared<std::atomic<Millis>>(1'000'000);
  std::function<Millis()> fn() const {
    return [n = now] { return n->load(); };
  }
};

ReviewOptions options_with(const FakeClock& clock) {
  ReviewOptions o;
  o.clock = clock.fn();
  o.lease = std::chrono::minutes(30);
  o.sync_each_write = false;
  return o;
}

std::vector<AnnotatedEntry> fresh(std::size_t n, Label tag = Label::Irony, const std::string& prefix = "e") {
  std::vector<AnnotatedEntry> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(annotated(prefix + std::to_string(i), tag));
  return out;
}

}  // namespace

TEST(Enqueue, AddsPendingItems) {
  ReviewQueue q;
  EXPECT_EQ(q.enqueue(fresh(10)), 10u);
  const auto c = q.counts();
  EXPECT_EQ(c.pending, 10u);
  EXPECT_EQ(c.total, 10u);
  EXPECT_EQ(q.enqueue({}), 0u);
}

TEST(Enqueue, DuplicatesRejectedWholesale) {
  ReviewQueue q;
  q.enqueue(fresh(3));
  EXPECT_EQ(code_of([&] { q.enqueue({annotated("e1", Label::Neutral)}); }), ErrorCode::DuplicateId);
  EXPECT_EQ(code_of([&] { q.enqueue({annotated("x", Label::Neutral), annotated("x", Label::Irony)}); }),
            ErrorCode::DuplicateId);
  EXPECT_EQ(q.counts().total, 3u);
  auto mismatched = annotated("y", Label::Neutral);
  mismatched.annotation.entry_id = "z";
  EXPECT_EQ(code_of([&] { q.enqueue({mismatched}); }), ErrorCode::ContractViolation);
}

TEST(NextPending, OldestFirstAndEmpty) {
  ReviewQueue empty;
  EXPECT_FALSE(empty.next_pending("ana"));

  ReviewQueue q;
  q.enqueue(fresh(3));
  auto a = q.next_pending("ana");
  auto b = q.next_pending("luis");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->entry.id, "e0");
  EXPECT_EQ(b->entry.id, "e1");
  EXPECT_EQ(a->status, ItemStatus::Assigned);
  EXPECT_EQ(a->assigned_to, "ana");
}

TEST(NextPending, ConcurrentPollsAreDisjoint) {
  ReviewQueue q;
  q.enqueue(fresh(200));
  std::mutex m;
  std::vector<std::string> served;
  std::vector<std::thread> ts;
  for (int r = 0; r < 2; ++r) {
    ts.emplace_back([&, r] {
      while (auto item = q.next_pending("rev" + std::to_string(r))) {
        std::lock_guard lock(m);
        served.push_back(item->entry.id);
      }
    });
  }
  for (auto& t : ts) t.join();
  std::set<std::string> unique(served.begin(), served.end());
  EXPECT_EQ(served.size(), 200u);
  EXPECT_EQ(unique.size(), 200u);
}

TEST(NextPending, ExpiredLeaseIsReserved) {
  FakeClock clock;
  ReviewQueue q(options_with(clock));
  q.enqueue(fresh(1));
  ASSERT_TRUE(q.next_pending("ana"));
  EXPECT_FALSE(q.next_pending("luis"));
  *clock.now += 30 * 60 * 1000 - 1;
  EXPECT_FALSE(q.next_pending("luis"));
  EXPECT_EQ(q.counts().assigned, 1u);
  *clock.now += 1;
  EXPECT_EQ(q.counts().pending, 1u);
  auto again = q.next_pending("luis");
  ASSERT_TRUE(again);
  EXPECT_EQ(again->entry.id, "e0");
  EXPECT_EQ(again->assigned_to, "luis");
  // The previous holder lost the item once it was handed to someone else.
  EXPECT_EQ(code_of([&] { q.submit_verdict("e0", {Decision::Accept, {}, "ana"}); }), ErrorCode::NotAssigned);
  EXPECT_NO_THROW(q.submit_verdict("e0", {Decision::Accept, {}, "luis"}));
}

TEST(NextPending, LapsedLeaseStillHonoredUntilReassigned) {
  FakeClock clock;
  ReviewQueue q(options_with(clock));
  q.enqueue(fresh(1));
  q.next_pending("ana");
  *clock.now += 31 * 60 * 1000;
  EXPECT_NO_THROW(q.submit_verdict("e0", {Decision::Accept, {}, "ana"}));
}

TEST(SubmitVerdict, FinalTags) {
  ReviewQueue q;
  q.enqueue({annotated("a", Label::Irony), annotated("b", Label::Irony), annotated("c", Label::Irony)});
  for (int i = 0; i < 3; ++i) q.next_pending("ana");
  EXPECT_EQ(q.submit_verdict("a", {Decision::Accept, {}, "ana"}).final_tag, Label::Irony);
  EXPECT_EQ(q.submit_verdict("b", {Decision::Override, Label::Negative, "ana"}).final_tag, Label::Negative);
  const auto v = q.submit_verdict("c", {Decision::Unreadable, {}, "ana"});
  EXPECT_FALSE(v.final_tag);
  const auto exported = q.export_verified();
  ASSERT_EQ(exported.size(), 2u);
  EXPECT_EQ(exported[0].id, "a");
  EXPECT_EQ(exported[1].label, Label::Negative);
  EXPECT_EQ(exported[1].provenance, Provenance::MachineVerified);
}

TEST(SubmitVerdict, Errors) {
  ReviewQueue q;
  q.enqueue(fresh(2));
  q.next_pending("ana");
  EXPECT_EQ(code_of([&] { q.submit_verdict("nope", {Decision::Accept, {}, "ana"}); }), ErrorCode::NotFound);
  EXPECT_EQ(code_of([&] { q.submit_verdict("e0", {Decision::Override, {}, "ana"}); }), ErrorCode::InvalidVerdict);
  EXPECT_EQ(code_of([&] { q.submit_verdict("e0", {Decision::Override, Label::Irony, "ana"}); }),
            ErrorCode::InvalidVerdict);
  EXPECT_EQ(code_of([&] { q.submit_verdict("e0", {Decision::Override, Label::NotIrony, "ana"}); }),
            ErrorCode::InvalidVerdict);
  EXPECT_EQ(code_of([&] { q.submit_verdict("e0", {Decision::Unreadable, Label::Neutral, "ana"}); }),
            ErrorCode::InvalidVerdict);
  EXPECT_EQ(code_of([&] { q.submit_verdict("e1", {Decision::Accept, {}, "ana"}); }), ErrorCode::NotAssigned);
  EXPECT_EQ(code_of([&] { q.submit_verdict("e0", {Decision::Accept, {}, "luis"}); }), ErrorCode::NotAssigned);
  q.submit_verdict("e0", {Decision::Accept, {}, "ana"});
  EXPECT_EQ(code_of([&] { q.submit_verdict("e0", {Decision::Accept, {}, "ana"}); }), ErrorCode::AlreadyResolved);
}

TEST(Agreement, AllAcceptMirrorsColumns) {
  ReviewQueue q;
  std::vector<Label> machine = {Label::Irony, Label::Irony, Label::Negative, Label::Positive, Label::Neutral};
  resolve_all(q, machine, {machine.begin(), machine.end()});
  const auto r = q.agreement_report();
  for (Label l : kMulticlassLabels) EXPECT_DOUBLE_EQ(r.machine_percent(l), r.human_percent(l));
  EXPECT_DOUBLE_EQ(r.unreadable_percent(), 0.0);
  EXPECT_DOUBLE_EQ(r.machine_percent(Label::Irony), 40.0);
}

TEST(Agreement, UnreadableShareOf1034) {
  ReviewQueue q;
  auto [machine, human] = paired_columns(
      {{Label::Irony, 761}, {Label::Negative, 40}, {Label::Positive, 233}},
      {{Label::Irony, 548}, {Label::Negative, 136}, {Label::Neutral, 302}, {Label::Positive, 30}}, 18, 5);
  ASSERT_EQ(machine.size(), 1034u);
  ASSERT_EQ(human.size(), 1034u);
  resolve_all(q, machine, human);
  const auto r = q.agreement_report();
  EXPECT_EQ(r.total, 1034u);
  EXPECT_NEAR(r.unreadable_percent(), 1.7, 0.05);
  EXPECT_EQ(q.export_verified().size(), 1016u);
}

TEST(Agreement, RandomFixtureMatchesTally) {
  std::mt19937_64 rng(17);
  std::vector<Label> machine;
  std::vector<std::optional<Label>> human;
  std::map<Label, std::size_t> mc, hc;
  std::size_t unreadable = 0;
  for (int i = 0; i < 200; ++i) {
    machine.push_back(kMulticlassLabels[rng() % 4]);
    ++mc[machine.back()];
    if (rng() % 10 == 0) {
      human.push_back(std::nullopt);
      ++unreadable;
    } else {
      human.push_back(kMulticlassLabels[rng() % 4]);
      ++hc[*human.back()];
    }
  }
  ReviewQueue q;
  resolve_all(q, machine, human);
  const auto r = q.agreement_report();
  EXPECT_EQ(r.unreadable, unreadable);
  for (Label l : kMulticlassLabels) {
    EXPECT_EQ(r.machine_counts.count(l) ? r.machine_counts.at(l) : 0, mc[l]);
    EXPECT_EQ(r.human_counts.count(l) ? r.human_counts.at(l) : 0, hc[l]);
    EXPECT_DOUBLE_EQ(r.machine_percent(l), 100.0 * static_cast<double>(mc[l]) / 200.0);
  }
}

TEST(Agreement, IncompleteQueue) {
  ReviewQueue q;
  q.enqueue(fresh(2));
  auto item = q.next_pending("ana");
  q.submit_verdict(item->entry.id, {Decision::Accept, {}, "ana"});
  EXPECT_EQ(code_of([&] { q.agreement_report(); }), ErrorCode::IncompleteQueue);
  EXPECT_EQ(code_of([&] { q.export_verified(); }), ErrorCode::IncompleteQueue);
  EXPECT_EQ(q.resolved_agreement().total, 1u);
}

TEST(Export, AllUnreadableIsEmpty) {
  ReviewQueue q;
  resolve_all(q, {Label::Irony, Label::Neutral}, {std::nullopt, std::nullopt});
  EXPECT_TRUE(q.export_verified().empty());
}

TEST(Export, MixedLabelsEqualFinalTags) {
  ReviewQueue q;
  std::vector<Label> machine = {Label::Irony, Label::Negative, Label::Neutral, Label::Positive};
  std::vector<std::optional<Label>> human = {Label::Irony, Label::Positive, Label::Neutral, Label::Irony};
  resolve_all(q, machine, human);
  const auto out = q.export_verified();
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(out[i].label, human[i]);
    EXPECT_EQ(out[i].category_encoded, encode(*human[i], Mode::Multiclass));
  }
  EXPECT_EQ(verdict_for(Label::Irony, Label::Irony, "x").decision, Decision::Accept);
}

TEST(EventLog, ReplayRestoresState) {
  TempDir dir;
  const auto path = dir.file("queue.jsonl");
  FakeClock clock;
  {
    auto q = ReviewQueue::open(path, options_with(clock));
    q->enqueue(fresh(4));
    q->next_pending("ana");
    q->next_pending("ana");
    q->submit_verdict("e0", {Decision::Override, Label::Positive, "ana"});
    EXPECT_EQ(q->last_sequence(), 7u);
  }
  auto q = ReviewQueue::open(path, options_with(clock));
  const auto c = q->counts();
  EXPECT_EQ(c.resolved, 1u);
  EXPECT_EQ(c.assigned, 1u);
  EXPECT_EQ(c.pending, 2u);
  EXPECT_EQ(q->item("e0")->verdict->final_tag, Label::Positive);
  EXPECT_EQ(q->item("e1")->assigned_to, "ana");
  EXPECT_NO_THROW(q->submit_verdict("e1", {Decision::Accept, {}, "ana"}));
  EXPECT_EQ(q->next_pending("luis")->entry.id, "e2");
  EXPECT_EQ(q->last_sequence(), 9u);
}

TEST(EventLog, CorruptSequenceIsRejected) {
  TempDir dir;
  const auto path = dir.file("bad.jsonl");
  {
    auto q = ReviewQueue::open(path);
    q->enqueue(fresh(2));
  }
  auto text = detail::read_file(path);
  const auto second = text.find('\n') + 1;
  detail::write_file(path, text.substr(second) + text.substr(0, second));
  EXPECT_THROW(ReviewQueue::open(path), Error);
}
