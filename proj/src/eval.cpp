#include "evtrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "evtrack/errors.hpp"
#include "json.hpp"

namespace evt {

namespace {

std::map<std::int64_t, std::vector<const TrackRow*>> by_frame(const TrackLog& log) {
    std::map<std::int64_t, std::vector<const TrackRow*>> m;
    for (const TrackRow& r : log) m[r.frame_idx].push_back(&r);
    return m;
}

struct MatchedPair {
    const TrackRow* track;
    const TrackRow* gt;
    double iou;
};

/// Greedy one-to-one matching in descending IoU, gated at min_iou.
std::vector<MatchedPair> greedy_match(const std::vector<const TrackRow*>& tracks,
                                      const std::vector<const TrackRow*>& gts,
                                      double min_iou) {
    struct Cand {
        double v;
        std::size_t ti, gi;
    };
    std::vector<Cand> cands;
    for (std::size_t ti = 0; ti < tracks.size(); ++ti)
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            const double v = iou(tracks[ti]->box, gts[gi]->box);
            if (v > min_iou) cands.push_back({v, ti, gi});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.v != b.v) return a.v > b.v;
        if (a.ti != b.ti) return a.ti < b.ti;
        return a.gi < b.gi;
    });
    std::vector<bool> t_used(tracks.size(), false), g_used(gts.size(), false);
    std::vector<MatchedPair> out;
    for (const Cand& c : cands) {
        if (t_used[c.ti] || g_used[c.gi]) continue;
        t_used[c.ti] = true;
        g_used[c.gi] = true;
        out.push_back({tracks[c.ti], gts[c.gi], c.v});
    }
    return out;
}

}  // namespace

PrecisionRecall detection_f1(const TrackLog& tracks, const AnnotationList& gt,
                             double iou_th) {
    if (gt.empty()) throw DataError("recall undefined: ground truth is empty");
    const auto track_frames = by_frame(tracks);
    const auto gt_frames = by_frame(gt);

    PrecisionRecall pr;
    std::set<std::int64_t> frames;
    for (const auto& [f, _] : track_frames) frames.insert(f);
    for (const auto& [f, _] : gt_frames) frames.insert(f);

    static const std::vector<const TrackRow*> kNone;
    for (std::int64_t f : frames) {
        const auto ti = track_frames.find(f);
        const auto gi = gt_frames.find(f);
        const auto& trows = ti != track_frames.end() ? ti->second : kNone;
        const auto& grows = gi != gt_frames.end() ? gi->second : kNone;
        const auto matches = greedy_match(trows, grows, iou_th);
        pr.tp += std::int64_t(matches.size());
        pr.fp += std::int64_t(trows.size() - matches.size());
        pr.fn += std::int64_t(grows.size() - matches.size());
    }
    pr.precision = (pr.tp + pr.fp) ? double(pr.tp) / double(pr.tp + pr.fp) : 0.0;
    pr.recall = (pr.tp + pr.fn) ? double(pr.tp) / double(pr.tp + pr.fn) : 0.0;
    pr.f1 = (pr.precision + pr.recall) > 0
                ? 2 * pr.precision * pr.recall / (pr.precision + pr.recall)
                : 0.0;
    return pr;
}

double weighted_f1(const std::vector<std::pair<double, std::int64_t>>& f1_and_tracks) {
    double num = 0, den = 0;
    for (const auto& [f1, n] : f1_and_tracks) {
        num += f1 * double(n);
        den += double(n);
    }
    if (den <= 0) throw DataError("weighted F1 undefined: no tracks in any recording");
    return num / den;
}

double eao(const TrackLog& tracks, const AnnotationList& gt) {
    if (gt.empty()) throw DataError("EAO undefined: no ground-truth tracks");

    std::map<int, std::map<std::int64_t, const TrackRow*>> gt_tracks, pred_tracks;
    for (const Annotation& a : gt) gt_tracks[a.track_id][a.frame_idx] = &a;
    for (const TrackRow& r : tracks) pred_tracks[r.track_id][r.frame_idx] = &r;

    double sum = 0.0;
    for (const auto& [gid, gframes] : gt_tracks) {
        // the longest matching track: most frames with spatial overlap, ties
        // resolved by total IoU
        int best_pred = -1;
        std::size_t best_overlap = 0;
        double best_total = 0.0;
        for (const auto& [pid, pframes] : pred_tracks) {
            std::size_t overlap = 0;
            double total = 0.0;
            for (const auto& [f, grow] : gframes) {
                const auto it = pframes.find(f);
                if (it == pframes.end()) continue;
                const double v = iou(grow->box, it->second->box);
                if (v > 0) {
                    ++overlap;
                    total += v;
                }
            }
            if (overlap > best_overlap ||
                (overlap == best_overlap && overlap > 0 && total > best_total)) {
                best_overlap = overlap;
                best_total = total;
                best_pred = pid;
            }
        }
        double track_sum = 0.0;
        if (best_pred >= 0) {
            const auto& pframes = pred_tracks[best_pred];
            for (const auto& [f, grow] : gframes) {
                const auto it = pframes.find(f);
                if (it != pframes.end()) track_sum += iou(grow->box, it->second->box);
            }
        }
        sum += track_sum / double(gframes.size());
    }
    return sum / double(gt_tracks.size());
}

ClassificationReport classification_report(const TrackLog& tracks,
                                           const AnnotationList& gt,
                                           double match_iou) {
    ClassificationReport rep;
    const auto track_frames = by_frame(tracks);
    const auto gt_frames = by_frame(gt);

    std::map<int, std::pair<std::int64_t, std::int64_t>> per_class_samples;  // correct, total
    std::map<int, std::vector<int>> track_pred_votes;  // gt track -> predicted classes
    std::map<int, int> gt_track_class;
    for (const Annotation& a : gt) gt_track_class[a.track_id] = a.class_id;

    for (const auto& [f, grows] : gt_frames) {
        const auto ti = track_frames.find(f);
        if (ti == track_frames.end()) continue;
        for (const MatchedPair& m : greedy_match(ti->second, grows, match_iou)) {
            auto& [correct, total] = per_class_samples[m.gt->class_id];
            total += 1;
            if (m.track->class_id == m.gt->class_id) correct += 1;
            track_pred_votes[m.gt->track_id].push_back(m.track->class_id);
        }
    }

    std::int64_t sample_correct = 0, sample_total = 0;
    double balanced_sum = 0;
    int balanced_classes = 0;
    for (const auto& [cls, ct] : per_class_samples) {
        sample_correct += ct.first;
        sample_total += ct.second;
        if (ct.second > 0) {
            balanced_sum += double(ct.first) / double(ct.second);
            ++balanced_classes;
        }
    }
    rep.per_sample = sample_total ? double(sample_correct) / double(sample_total) : 0.0;
    rep.balanced_per_sample = balanced_classes ? balanced_sum / balanced_classes : 0.0;

    std::map<int, std::pair<std::int64_t, std::int64_t>> per_class_tracks;
    for (const auto& [gid, cls] : gt_track_class) {
        auto it = track_pred_votes.find(gid);
        int predicted = kUnknownClass;
        if (it != track_pred_votes.end()) {
            std::map<int, int> tally;
            for (int v : it->second) tally[v] += 1;
            int best_count = 0;  // ties resolve to the lowest class id
            for (const auto& [c, n] : tally)
                if (n > best_count) {
                    best_count = n;
                    predicted = c;
                }
        }
        auto& [correct, total] = per_class_tracks[cls];
        total += 1;
        if (predicted == cls) correct += 1;
        rep.confusion[cls][predicted] += 1;
    }
    std::int64_t track_correct = 0, track_total = 0;
    double balanced_track_sum = 0;
    int balanced_track_classes = 0;
    for (const auto& [cls, ct] : per_class_tracks) {
        track_correct += ct.first;
        track_total += ct.second;
        if (ct.second > 0) {
            balanced_track_sum += double(ct.first) / double(ct.second);
            ++balanced_track_classes;
        }
    }
    rep.per_track = track_total ? double(track_correct) / double(track_total) : 0.0;
    rep.balanced_per_track =
        balanced_track_classes ? balanced_track_sum / balanced_track_classes : 0.0;
    return rep;
}

double f1_auc(const std::vector<double>& thresholds, const std::vector<double>& f1) {
    double auc = 0.0;
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        auc += 0.5 * (f1[i] + f1[i - 1]) * (thresholds[i] - thresholds[i - 1]);
    return auc;
}

RecordingMetrics evaluate_recording(const std::string& name, const TrackLog& tracks,
                                    const AnnotationList& gt) {
    RecordingMetrics m;
    m.name = name;
    for (int i = 1; i <= 9; ++i) m.iou_thresholds.push_back(i / 10.0);
    std::vector<double> f1s;
    for (double th : m.iou_thresholds) {
        m.detection.push_back(detection_f1(tracks, gt, th));
        f1s.push_back(m.detection.back().f1);
    }
    m.f1_auc = f1_auc(m.iou_thresholds, f1s);
    m.eao = eao(tracks, gt);
    std::set<int> gt_ids;
    for (const Annotation& a : gt) gt_ids.insert(a.track_id);
    m.gt_tracks = std::int64_t(gt_ids.size());
    m.classification = classification_report(tracks, gt);
    return m;
}

std::string metrics_to_json(const std::vector<RecordingMetrics>& recordings,
                            double weighted_f1_at_01) {
    nlohmann::json root;
    root["weighted_f1_at_0.1"] = weighted_f1_at_01;
    for (const RecordingMetrics& m : recordings) {
        nlohmann::json r;
        r["name"] = m.name;
        r["eao"] = m.eao;
        r["f1_auc"] = m.f1_auc;
        r["gt_tracks"] = m.gt_tracks;
        r["classification"] = {
            {"per_sample", m.classification.per_sample},
            {"per_track", m.classification.per_track},
            {"balanced_per_sample", m.classification.balanced_per_sample},
            {"balanced_per_track", m.classification.balanced_per_track},
        };
        for (std::size_t i = 0; i < m.iou_thresholds.size(); ++i) {
            nlohmann::json d;
            d["iou_th"] = m.iou_thresholds[i];
            d["precision"] = m.detection[i].precision;
            d["recall"] = m.detection[i].recall;
            d["f1"] = m.detection[i].f1;
            r["detection"].push_back(d);
        }
        root["recordings"].push_back(r);
    }
    return root.dump(2);
}

void write_tracklog_csv(const TrackLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "frame_idx,track_id,class_id,x,y,w,h,occluded\n";
    for (const TrackRow& r : log)
        out << r.frame_idx << ',' << r.track_id << ',' << r.class_id << ',' << r.box.x
            << ',' << r.box.y << ',' << r.box.w << ',' << r.box.h << ','
            << (r.occluded ? 1 : 0) << '\n';
    if (!out) throw DataError("write failure on " + path);
}

TrackLog read_tracklog_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    TrackLog log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (line_no == 1 && line.find("frame_idx") == 0) continue;
        std::vector<long long> fields;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string field =
                line.substr(pos, comma == std::string::npos ? comma : comma - pos);
            try {
                fields.push_back(std::stoll(field));
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(line_no) + ": bad field '" +
                                field + "'");
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (fields.size() != 7 && fields.size() != 8)
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected 7 or 8 columns");
        TrackRow r;
        r.frame_idx = fields[0];
        r.track_id = int(fields[1]);
        r.class_id = int(fields[2]);
        r.box = {int(fields[3]), int(fields[4]), int(fields[5]), int(fields[6])};
        r.occluded = fields.size() == 8 && fields[7] != 0;
        log.push_back(r);
    }
    return log;
}

std::string metrics_to_csv(const std::vector<RecordingMetrics>& recordings) {
    std::string out = "recording,iou_th,precision,recall,f1\n";
    char buf[160];
    for (const RecordingMetrics& m : recordings)
        for (std::size_t i = 0; i < m.iou_thresholds.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s,%.1f,%.6f,%.6f,%.6f\n", m.name.c_str(),
                          m.iou_thresholds[i], m.detection[i].precision,
                          m.detection[i].recall, m.detection[i].f1);
            out += buf;
        }
    return out;
}

}  // namespace evt
