#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "ironia/corpus.hpp"
#include "ironia/review.hpp"

namespace ironia {

inline nlohmann::json to_json(const DistributionReport& d) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : d.rows) {
    rows.push_back({{"label", std::string(to_string(r.label))},
                    {"count", r.count},
                    {"percent", r.percent},
                    {"percent_2dp", r.percent_2dp(d.total)}});
  }
  return {{"mode", std::string(to_string(d.mode))}, {"total", d.total}, {"rows", rows}};
}

namespace detail {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::AlreadyResolved:
    case ErrorCode::NotAssigned:
    case ErrorCode::DuplicateId: return 409;
    case ErrorCode::InvalidVerdict:
    case ErrorCode::UnknownLabel:
    case ErrorCode::ParseError: return 400;
    default: return 500;
  }
}

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.code()),
            {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
}

}  // namespace detail

/// Live statistics: agreement over resolved items, queue counts, and the
/// class distribution of everything exportable so far.
inline nlohmann::json review_stats(const ReviewQueue& queue) {
  nlohmann::json out;
  out["agreement"] = to_json(queue.resolved_agreement());
  const auto c = queue.counts();
  out["counts"] = {{"pending", c.pending}, {"assigned", c.assigned}, {"resolved", c.resolved}, {"total", c.total}};
  Dataset verified{"verified", Mode::Multiclass, {}};
  for (const auto& item : queue.snapshot()) {
    if (item.status == ItemStatus::Resolved && item.verdict->final_tag) {
      Entry e = item.entry;
      e.label = item.verdict->final_tag;
      verified.entries.push_back(std::move(e));
    }
  }
  out["distribution"] = verified.empty() ? nlohmann::json(nullptr) : to_json(class_distribution(verified));
  return out;
}

/// Mounts the reviewer API on `server`:
///   GET  /api/queue/next?reviewer=ID   200 item | 204 empty | 400
///   POST /api/verdicts                 200 | 400 | 404 | 409
///   GET  /api/stats                    200
///   GET  /api/entries/{id}             200 | 404
inline void mount_review_api(httplib::Server& server, ReviewQueue& queue) {
  server.Get("/api/queue/next", [&queue](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("reviewer") || req.get_param_value("reviewer").empty()) {
      detail::send_json(res, 400, {{"error", "InvalidRequest"}, {"message", "reviewer parameter required"}});
      return;
    }
    auto item = queue.next_pending(req.get_param_value("reviewer"));
    if (!item) {
      res.status = 204;
      return;
    }
    detail::send_json(res, 200, to_json(*item));
  });

  server.Post("/api/verdicts", [&queue](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("entry_id") ||
        !body.contains("decision") || !body.contains("reviewer_id") || !body["entry_id"].is_string() ||
        !body["decision"].is_string() || !body["reviewer_id"].is_string()) {
      detail::send_json(res, 400, {{"error", "InvalidRequest"},
                                   {"message", "expected {entry_id, decision, override_tag?, reviewer_id}"}});
      return;
    }
    try {
      VerdictInput input;
      input.decision = parse_decision(body["decision"].get<std::string>());
      input.reviewer_id = body["reviewer_id"].get<std::string>();
      if (body.contains("override_tag") && !body["override_tag"].is_null()) {
        if (!body["override_tag"].is_string()) throw Error(ErrorCode::InvalidVerdict, "override_tag must be a string");
        auto tag = try_parse_label(body["override_tag"].get<std::string>());
        if (!tag) throw Error(ErrorCode::InvalidVerdict, "unknown override tag");
        input.override_tag = *tag;
      }
      auto verdict = queue.submit_verdict(body["entry_id"].get<std::string>(), input);
      detail::send_json(res, 200, to_json(verdict));
    } catch (const Error& e) {
      detail::send_error(res, e);
    }
  });

  server.Get("/api/stats", [&queue](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, review_stats(queue));
  });

  server.Get(R"(/api/entries/(.+))", [&queue](const httplib::Request& req, httplib::Response& res) {
    auto item = queue.item(req.matches[1].str());
    if (!item) {
      detail::send_json(res, 404, {{"error", "NotFound"}, {"message", "unknown entry"}});
      return;
    }
    detail::send_json(res, 200, to_json(*item));
  });
}

}  // namespace ironia
