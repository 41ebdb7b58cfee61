#include "eqgraph/matcher.hpp"

#include "eqgraph/core_model.hpp"
#include "eqgraph/correspondence.hpp"
#include "eqgraph/error.hpp"
#include "eqgraph/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace eqgraph {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::vector<DescriptorId> hit_ids(const std::vector<IndexHit>& hits) {
  std::vector<DescriptorId> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(h.id);
  return out;
}

void merge_ids(std::vector<DescriptorId>& into, const std::vector<DescriptorId>& more) {
  into.insert(into.end(), more.begin(), more.end());
  std::sort(into.begin(), into.end());
  into.erase(std::unique(into.begin(), into.end()), into.end());
}

// Best valid (entrance, exit) over the candidate lists; both lists must be
// sorted by id so that the first minimum found has the lowest ids.
std::optional<GateAssignment> best_combination(const Vector& x, const Vector& y,
                                               const std::vector<DescriptorId>& entrances,
                                               const std::vector<DescriptorId>& exits,
                                               const Model& model) {
  std::optional<GateAssignment> best;
  for (const auto e : entrances) {
    for (const auto g : exits) {
      if (!gates_valid(e, g, model)) continue;
      const double m = pair_path_measure(x, y, e, g, model);
      if (!best || m < best->m_prime) {
        best = GateAssignment{model.descriptor(e).collection, model.descriptor(g).collection, e,
                              g, m};
      }
    }
  }
  return best;
}

std::vector<CollectionId> top_collections(const std::vector<CollectionVote>& ranking, int n) {
  std::vector<CollectionId> out;
  for (const auto& v : ranking) {
    if (static_cast<int>(out.size()) >= n) break;
    out.push_back(v.collection);
  }
  return out;
}

}  // namespace

DescriptorIndex::Part DescriptorIndex::make_part(const std::vector<const Descriptor*>& members,
                                                 int dimension) {
  Part part;
  std::vector<double> buffer;
  buffer.reserve(members.size() * static_cast<std::size_t>(dimension));
  for (const auto* d : members) {
    buffer.insert(buffer.end(), d->vector.data(), d->vector.data() + d->vector.size());
    part.ids.push_back(d->id);
  }
  if (!members.empty()) part.tree = KdTree(std::move(buffer), static_cast<std::size_t>(dimension));
  return part;
}

std::vector<IndexHit> DescriptorIndex::query(const Part& part, const Vector& q, std::size_t k) {
  std::vector<IndexHit> out;
  if (part.ids.empty()) return out;
  for (const auto& n : part.tree.knn(as_span(q), k))
    out.push_back({part.ids[n.index], std::sqrt(n.squared_distance)});
  return out;
}

DescriptorIndex::DescriptorIndex(const Model& model) {
  if (model.empty()) throw InvalidArgument("DescriptorIndex: model has no equivalence sets");
  const auto all = model.descriptors_by_id();
  std::map<CollectionId, std::vector<const Descriptor*>> members;
  for (const auto* d : all) {
    const auto* set = model.set_of(d->id);
    labels_.emplace(d->id, DescriptorLabel{d->ensemble, d->collection,
                                           set ? std::optional<SetId>(set->id) : std::nullopt});
    global_ids_.push_back(d->id);
    if (set) members[d->collection].push_back(d);
  }
  global_ = make_part(all, model.dimension());
  for (const auto& [c, list] : members) per_collection_.emplace(c, make_part(list, model.dimension()));
}

std::vector<IndexHit> DescriptorIndex::nearest(const Vector& q, std::size_t k) const {
  return query(global_, q, k);
}

std::vector<IndexHit> DescriptorIndex::nearest_in(CollectionId collection, const Vector& q,
                                                  std::size_t k) const {
  const auto it = per_collection_.find(collection);
  if (it == per_collection_.end()) return {};
  return query(it->second, q, k);
}

void validate(const MatchParams& params) {
  if (params.vote_k <= 0 || params.gate_candidates <= 0 || params.refine_iters < 0 ||
      params.top_n <= 0 || params.collection_candidates <= 0)
    throw InvalidArgument("match parameters must be positive");
}

std::vector<CollectionVote> rank_collections(const std::vector<Vector>& queries,
                                             const DescriptorIndex& index, int vote_k) {
  std::map<CollectionId, CollectionVote> tally;
  for (const auto& q : queries) {
    for (const auto& hit : index.nearest(q, static_cast<std::size_t>(vote_k))) {
      auto& v = tally[index.label(hit.id).collection];
      v.collection = index.label(hit.id).collection;
      ++v.votes;
      v.total_distance += hit.distance;
    }
  }
  std::vector<CollectionVote> out;
  for (const auto& [_, v] : tally) out.push_back(v);
  std::stable_sort(out.begin(), out.end(), [](const CollectionVote& l, const CollectionVote& r) {
    if (l.votes != r.votes) return l.votes > r.votes;
    return l.total_distance < r.total_distance;
  });
  return out;
}

CollectionId assign_collection(const Ensemble& ensemble, const DescriptorIndex& index,
                               int vote_k) {
  std::vector<Vector> queries;
  for (const auto& d : ensemble.descriptors) queries.push_back(d.vector);
  const auto ranking = rank_collections(queries, index, vote_k);
  if (ranking.empty()) throw InvalidArgument("assign_collection: nothing to vote with");
  return ranking.front().collection;
}

bool gates_valid(DescriptorId entrance, DescriptorId exit, const Model& model) {
  const auto* a = model.set_of(entrance);
  const auto* b = model.set_of(exit);
  if (!a || !b) return false;
  if (a->collection == b->collection) return a->id == b->id;
  return model.linked(a->id, b->id);
}

double pair_path_measure(const Vector& x, const Vector& y, DescriptorId entrance,
                         DescriptorId exit, const Model& model) {
  if (!gates_valid(entrance, exit, model))
    throw InvalidArgument("pair_path_measure: entrance and exit sets are not linked");
  const Vector& de = model.descriptor(entrance).vector;
  const Vector& dx = model.descriptor(exit).vector;
  const Vector& b1 = model.bridging_vector(model.set_of(entrance)->id);
  const Vector& b2 = model.bridging_vector(model.set_of(exit)->id);
  if (x.size() != de.size() || y.size() != dx.size())
    throw DimensionMismatch("pair_path_measure: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double v = ((de[k] - x[k]) + (b2[k] - b1[k])) + (y[k] - dx[k]);
    sum += v * v;
  }
  return std::sqrt(sum);
}

std::optional<GateAssignment> assign_gates(const Vector& x, const Vector& y,
                                           CollectionId probe_collection,
                                           CollectionId gallery_collection,
                                           const DescriptorIndex& index, const Model& model,
                                           int gate_candidates) {
  const auto k = static_cast<std::size_t>(gate_candidates);
  std::vector<DescriptorId> entrances, exits;
  merge_ids(entrances, hit_ids(index.nearest_in(probe_collection, x, k)));
  merge_ids(exits, hit_ids(index.nearest_in(gallery_collection, y, k)));
  return best_combination(x, y, entrances, exits, model);
}

RefineResult refine_assignments(const std::vector<Vector>& xs, const std::vector<Vector>& ys,
                                std::vector<std::optional<GateAssignment>> gates,
                                CollectionId probe_collection, CollectionId gallery_collection,
                                const DescriptorIndex& index, const Model& model,
                                const MatchParams& params) {
  const std::size_t n = xs.size();
  const auto k = static_cast<std::size_t>(params.gate_candidates);
  RefineResult out;
  out.traces.resize(n);
  auto record = [&] {
    for (std::size_t i = 0; i < n; ++i)
      out.traces[i].push_back(gates[i] ? gates[i]->m_prime : kInf);
  };
  record();

  const int collection_rounds = (params.refine_iters + 1) / 2;
  for (int round = 0; round < params.refine_iters; ++round) {
    const bool allow_collections = round < collection_rounds;

    // (a) Carry probe descriptors into the gallery-side frame and re-assign
    //     the gallery collection and exits.
    {
      std::vector<Vector> images(n);
      std::vector<Vector> voters = ys;
      for (std::size_t i = 0; i < n; ++i) {
        if (!gates[i]) continue;
        const auto& g = *gates[i];
        images[i] = model.descriptor(g.entrance).vector +
                    model.bridging_vector(model.set_of(g.exit)->id) -
                    model.bridging_vector(model.set_of(g.entrance)->id);
        voters.push_back(images[i]);
      }
      const auto shared = allow_collections
                              ? top_collections(rank_collections(voters, index, params.vote_k),
                                                params.collection_candidates)
                              : std::vector<CollectionId>{};
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<DescriptorId> entrances;
        if (gates[i]) entrances = {gates[i]->entrance};
        else merge_ids(entrances, hit_ids(index.nearest_in(probe_collection, xs[i], k)));

        std::vector<CollectionId> targets = shared;
        targets.push_back(gates[i] ? gates[i]->gallery_collection : gallery_collection);
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

        std::optional<GateAssignment> best = gates[i];
        for (const auto c : targets) {
          std::vector<DescriptorId> exits;
          merge_ids(exits, hit_ids(index.nearest_in(c, ys[i], k)));
          if (gates[i]) merge_ids(exits, hit_ids(index.nearest_in(c, images[i], k)));
          const auto cand = best_combination(xs[i], ys[i], entrances, exits, model);
          if (cand && (!best || cand->m_prime < best->m_prime)) best = cand;
        }
        gates[i] = best;
      }
    }

    // (b) Symmetric: gallery descriptors into the probe-side frame.
    {
      std::vector<Vector> images(n);
      std::vector<Vector> voters = xs;
      for (std::size_t i = 0; i < n; ++i) {
        if (!gates[i]) continue;
        const auto& g = *gates[i];
        images[i] = model.descriptor(g.exit).vector +
                    model.bridging_vector(model.set_of(g.entrance)->id) -
                    model.bridging_vector(model.set_of(g.exit)->id);
        voters.push_back(images[i]);
      }
      const auto shared = allow_collections
                              ? top_collections(rank_collections(voters, index, params.vote_k),
                                                params.collection_candidates)
                              : std::vector<CollectionId>{};
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<DescriptorId> exits;
        if (gates[i]) exits = {gates[i]->exit};
        else merge_ids(exits, hit_ids(index.nearest_in(gallery_collection, ys[i], k)));

        std::vector<CollectionId> targets = shared;
        targets.push_back(gates[i] ? gates[i]->probe_collection : probe_collection);
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

        std::optional<GateAssignment> best = gates[i];
        for (const auto c : targets) {
          std::vector<DescriptorId> entrances;
          merge_ids(entrances, hit_ids(index.nearest_in(c, xs[i], k)));
          if (gates[i]) merge_ids(entrances, hit_ids(index.nearest_in(c, images[i], k)));
          const auto cand = best_combination(xs[i], ys[i], entrances, exits, model);
          if (cand && (!best || cand->m_prime < best->m_prime)) best = cand;
        }
        gates[i] = best;
      }
    }
    record();
  }
  out.gates = std::move(gates);
  return out;
}

double pair_measure(const Vector& x, const Vector& y, const std::optional<GateAssignment>& gates) {
  const double direct = euclidean_distance(x, y);
  return gates ? std::min(gates->m_prime, direct) : direct;
}

double ensemble_measure(std::vector<double> m_values, int top_n) {
  std::sort(m_values.begin(), m_values.end());
  const auto n = std::min<std::size_t>(m_values.size(), static_cast<std::size_t>(std::max(top_n, 0)));
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += m_values[i];
  return s;
}

MatchResult match_ensembles(const Ensemble& probe, const Ensemble& gallery, const Model& model,
                            const DescriptorIndex& index, const MatchParams& params) {
  validate(params);
  const auto cs = correspond_ensembles(probe, gallery, model.params().correspondence);

  std::vector<Vector> xs, ys;
  for (const auto& p : cs.pairs) {
    xs.push_back(probe.descriptors[p.a].vector);
    ys.push_back(gallery.descriptors[p.b].vector);
  }

  MatchResult out;
  out.details.resize(cs.pairs.size());
  for (std::size_t i = 0; i < cs.pairs.size(); ++i) {
    out.details[i].probe_index = cs.pairs[i].a;
    out.details[i].gallery_index = cs.pairs[i].b;
    out.details[i].direct = euclidean_distance(xs[i], ys[i]);
  }

  if (!params.plain && !xs.empty()) {
    out.probe_collection = assign_collection(probe, index, params.vote_k);
    out.gallery_collection = assign_collection(gallery, index, params.vote_k);
    std::vector<std::optional<GateAssignment>> gates(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      gates[i] = assign_gates(xs[i], ys[i], out.probe_collection, out.gallery_collection, index,
                              model, params.gate_candidates);
    auto refined = refine_assignments(xs, ys, std::move(gates), out.probe_collection,
                                      out.gallery_collection, index, model, params);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out.details[i].gates = refined.gates[i];
      out.details[i].trace = std::move(refined.traces[i]);
    }
  }

  for (auto& d : out.details) {
    d.m = params.plain ? d.direct : std::min(d.gates ? d.gates->m_prime : kInf, d.direct);
    out.per_pair.push_back(d.m);
  }
  out.s = ensemble_measure(out.per_pair, params.top_n);
  return out;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(raw.rows(), raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    if (raw.cols() == 0) continue;
    const double lo = raw.row(r).minCoeff();
    const double hi = raw.row(r).maxCoeff();
    if (!(hi > lo)) continue;
    for (Eigen::Index c = 0; c < raw.cols(); ++c) out(r, c) = (raw(r, c) - lo) / (hi - lo);
  }
  return out;
}

DissimilarityMatrix dissimilarity_matrix(const std::vector<Ensemble>& probes,
                                         const std::vector<Ensemble>& galleries,
                                         const Model& model, const DescriptorIndex& index,
                                         const MatchParams& params) {
  validate(params);
  if (probes.empty() || galleries.empty())
    throw InvalidArgument("dissimilarity_matrix: need at least one probe and one gallery");
  DissimilarityMatrix out;
  for (const auto& p : probes) out.probe_ids.push_back(p.scan);
  for (const auto& g : galleries) out.gallery_ids.push_back(g.scan);

  const auto rows = static_cast<Eigen::Index>(probes.size());
  const auto cols = static_cast<Eigen::Index>(galleries.size());
  out.raw = Eigen::MatrixXd::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(probes.size() * galleries.size(), 0);

  parallel_for(probes.size() * galleries.size(), [&](std::size_t cell) {
    const auto p = cell / galleries.size();
    const auto g = cell % galleries.size();
    try {
      out.raw(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(g)) =
          match_ensembles(probes[p], galleries[g], model, index, params).s;
    } catch (const CorrespondenceFailure&) {
      failed[cell] = 1;
    } catch (const DegenerateGeometry&) {
      failed[cell] = 1;
    }
  });

  for (Eigen::Index r = 0; r < rows; ++r) {
    double row_max = 0.0;
    bool any = false;
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (failed[static_cast<std::size_t>(r * cols + c)]) continue;
      row_max = any ? std::max(row_max, out.raw(r, c)) : out.raw(r, c);
      any = true;
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!failed[static_cast<std::size_t>(r * cols + c)]) continue;
      out.raw(r, c) = row_max;
      out.failures.emplace_back(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
  }
  out.normalized = normalize_rows(out.raw);
  return out;
}

}  // namespace eqgraph
