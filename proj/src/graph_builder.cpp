#include "eqgraph/graph_builder.hpp"

#include "eqgraph/error.hpp"
#include "eqgraph/parallel.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <queue>

namespace eqgraph {

namespace {

std::vector<std::vector<int>> hop_distances(std::size_t n, const std::vector<EnsemblePair>& plan) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [a, b] : plan) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> q;
    dist[s][s] = 0;
    q.push(s);
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (const auto v : adj[u])
        if (dist[s][v] < 0) {
          dist[s][v] = dist[s][u] + 1;
          q.push(v);
        }
    }
  }
  return dist;
}

Vector mean_vector(const std::vector<const Descriptor*>& members) {
  Vector mean = Vector::Zero(members.front()->vector.size());
  for (const auto* d : members) mean += d->vector;
  return mean / static_cast<double>(members.size());
}

// At most one member per ensemble: the one nearest the group mean survives.
std::vector<const Descriptor*> one_per_ensemble(std::vector<const Descriptor*> members) {
  const Vector mean = mean_vector(members);
  std::map<EnsembleId, const Descriptor*> keep;
  for (const auto* d : members) {
    auto [it, inserted] = keep.emplace(d->ensemble, d);
    if (inserted) continue;
    const double incumbent = euclidean_distance(it->second->vector, mean);
    const double challenger = euclidean_distance(d->vector, mean);
    if (challenger < incumbent || (challenger == incumbent && d->id < it->second->id))
      it->second = d;
  }
  std::vector<const Descriptor*> out;
  for (const auto& [_, d] : keep) out.push_back(d);
  std::sort(out.begin(), out.end(),
            [](const Descriptor* l, const Descriptor* r) { return l->id < r->id; });
  return out;
}

Ensemble bridging_ensemble(const CollectionSets& cs,
                           const std::unordered_map<DescriptorId, const Descriptor*>& lookup) {
  Ensemble e;
  e.id = EnsembleId{cs.collection->id.value};
  e.subject = cs.collection->subject;
  e.scan = cs.collection->subject + "#bridging";
  for (const auto& set : cs.sets) e.descriptors.push_back(*lookup.at(set.bridging));
  return e;
}

}  // namespace

std::vector<EnsemblePair> plan_ensemble_pairs(std::size_t ensemble_count, int diameter_threshold) {
  if (ensemble_count < 2) throw InvalidArgument("plan_ensemble_pairs: need at least 2 ensembles");
  if (diameter_threshold < 1) throw InvalidArgument("plan_ensemble_pairs: threshold must be >= 1");
  std::vector<EnsemblePair> plan;
  for (std::size_t i = 0; i + 1 < ensemble_count; ++i) plan.emplace_back(i, i + 1);
  while (true) {
    const auto dist = hop_distances(ensemble_count, plan);
    int diameter = 0;
    EnsemblePair far{0, 0};
    for (std::size_t i = 0; i < ensemble_count; ++i)
      for (std::size_t j = i + 1; j < ensemble_count; ++j)
        if (dist[i][j] > diameter) {
          diameter = dist[i][j];
          far = {i, j};
        }
    if (diameter <= diameter_threshold) break;
    plan.push_back(far);
  }
  return plan;
}

int plan_diameter(std::size_t ensemble_count, const std::vector<EnsemblePair>& plan) {
  const auto dist = hop_distances(ensemble_count, plan);
  int diameter = 0;
  for (const auto& row : dist)
    for (const int d : row) {
      if (d < 0) return -1;
      diameter = std::max(diameter, d);
    }
  return diameter;
}

WeightedGraph weighted_graph(const std::vector<const Descriptor*>& vertices,
                             const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  WeightedGraph g;
  for (const auto* d : vertices) g.vertices.push_back(d->id);
  for (const auto& [u, v] : edges)
    g.edges.push_back(
        {u, v, inverse_distance_weight(descriptor_dissimilarity(*vertices[u], *vertices[v]))});
  normalize_weights(g);
  return g;
}

CollectionGraph build_collection_graph(const Collection& collection, const BuildParams& params) {
  CollectionGraph out;
  std::vector<const Descriptor*> vertices;
  std::vector<std::size_t> first_vertex;
  for (const auto& e : collection.ensembles) {
    first_vertex.push_back(vertices.size());
    for (const auto& d : e.descriptors) vertices.push_back(&d);
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [i, j] : plan_ensemble_pairs(collection, params.diameter_threshold)) {
    const auto& first = collection.ensembles[i];
    const auto& second = collection.ensembles[j];
    try {
      const auto cs = correspond_ensembles(first, second, params.correspondence);
      for (const auto& p : cs.pairs)
        if (p.inlier) edges.emplace_back(first_vertex[i] + p.a, first_vertex[j] + p.b);
    } catch (const CorrespondenceFailure& e) {
      out.failures.push_back(first.scan + " <-> " + second.scan + ": " + e.what());
    } catch (const DegenerateGeometry& e) {
      out.failures.push_back(first.scan + " <-> " + second.scan + ": " + e.what());
    }
  }
  if (edges.empty())
    throw BuildError("collection '" + collection.subject + "': no correspondences");

  WeightedGraph whole;
  for (const auto* d : vertices) whole.vertices.push_back(d->id);
  for (const auto& [u, v] : edges) whole.edges.push_back({u, v, 1.0});

  for (const auto& comp : connected_components(whole)) {
    std::vector<const Descriptor*> members;
    for (const auto v : comp) members.push_back(vertices[v]);
    std::vector<std::size_t> position(vertices.size(), 0);
    for (std::size_t k = 0; k < comp.size(); ++k) position[comp[k]] = k;
    std::vector<std::pair<std::size_t, std::size_t>> local;
    for (const auto& [u, v] : edges)
      if (std::binary_search(comp.begin(), comp.end(), u)) local.emplace_back(position[u], position[v]);
    out.components.push_back(weighted_graph(members, local));
  }
  return out;
}

RefinedSets refine_equivalence_sets(const std::vector<WeightedGraph>& components,
                                    std::size_t expected_size, const BuildParams& params) {
  const double upper = params.oversize_factor * static_cast<double>(expected_size);
  const double lower = params.min_size_fraction * static_cast<double>(expected_size);

  RefinedSets out;
  std::deque<WeightedGraph> work(components.begin(), components.end());
  std::vector<WeightedGraph> accepted;
  while (!work.empty()) {
    WeightedGraph g = std::move(work.front());
    work.pop_front();
    if (static_cast<double>(g.size()) <= upper || g.size() < 3) {
      accepted.push_back(std::move(g));
      continue;
    }
    const Bipartition split = fiedler_bipartition(g);
    if (split.lambda >= params.lambda_min) {
      accepted.push_back(std::move(g));
      continue;
    }
    for (const auto* side : {&split.a, &split.b}) {
      WeightedGraph sub = induced_subgraph(g, *side);
      for (const auto& comp : connected_components(sub)) {
        WeightedGraph piece = induced_subgraph(sub, comp);
        normalize_weights(piece);
        work.push_back(std::move(piece));
      }
    }
  }

  for (auto& g : accepted) {
    if (static_cast<double>(g.size()) < lower) {
      ++out.discarded;
      continue;
    }
    std::vector<DescriptorId> ids = g.vertices;
    std::sort(ids.begin(), ids.end());
    out.groups.push_back(std::move(ids));
  }
  std::sort(out.groups.begin(), out.groups.end(),
            [](const auto& l, const auto& r) { return l.front() < r.front(); });
  return out;
}

std::optional<DescriptorId> choose_bridging(
    const std::vector<const Descriptor*>& members,
    const std::function<bool(const Descriptor&)>& is_neutral) {
  if (members.empty()) return std::nullopt;
  const Vector mean = mean_vector(members);
  const Descriptor* best = nullptr;
  double best_distance = std::numeric_limits<double>::infinity();
  for (const auto* d : members) {
    if (!is_neutral(*d)) continue;
    const double dist = euclidean_distance(d->vector, mean);
    if (!best || dist < best_distance || (dist == best_distance && d->id < best->id)) {
      best = d;
      best_distance = dist;
    }
  }
  if (!best) return std::nullopt;
  return best->id;
}

LinkResult link_collections(const std::vector<CollectionSets>& per_collection,
                            const std::vector<std::size_t>& set_offsets,
                            const BuildParams& params) {
  std::unordered_map<DescriptorId, const Descriptor*> lookup;
  for (const auto& cs : per_collection)
    for (const auto& e : cs.collection->ensembles)
      for (const auto& d : e.descriptors) lookup.emplace(d.id, &d);

  std::vector<EnsemblePair> plan;
  if (params.topology == LinkTopology::hub) {
    std::optional<std::size_t> hub;
    for (std::size_t i = 0; i < per_collection.size(); ++i)
      if (per_collection[i].collection->subject == params.hub_subject) hub = i;
    if (!hub) throw BuildError("hub subject '" + params.hub_subject + "' is not a training collection");
    for (std::size_t i = 0; i < per_collection.size(); ++i)
      if (i != *hub) plan.emplace_back(std::min(i, *hub), std::max(i, *hub));
  } else {
    for (std::size_t i = 0; i < per_collection.size(); ++i)
      for (std::size_t j = i + 1; j < per_collection.size(); ++j) plan.emplace_back(i, j);
  }

  std::vector<Ensemble> pseudo;
  pseudo.reserve(per_collection.size());
  for (const auto& cs : per_collection) pseudo.push_back(bridging_ensemble(cs, lookup));

  std::vector<std::vector<IrLink>> found(plan.size());
  std::vector<std::string> failed(plan.size());
  parallel_for(plan.size(), [&](std::size_t k) {
    const auto [i, j] = plan[k];
    try {
      const auto cs = correspond_ensembles(pseudo[i], pseudo[j], params.correspondence);
      for (const auto& p : cs.pairs)
        if (p.inlier)
          found[k].push_back({SetId{set_offsets[i] + p.a}, SetId{set_offsets[j] + p.b}});
    } catch (const CorrespondenceFailure& e) {
      failed[k] = per_collection[i].collection->subject + " <-> " +
                  per_collection[j].collection->subject + ": " + e.what();
    } catch (const DegenerateGeometry& e) {
      failed[k] = per_collection[i].collection->subject + " <-> " +
                  per_collection[j].collection->subject + ": " + e.what();
    }
  });

  LinkResult out;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    out.links.insert(out.links.end(), found[k].begin(), found[k].end());
    if (!failed[k].empty()) out.failures.push_back(std::move(failed[k]));
  }
  return out;
}

BuildResult build_model(const std::vector<Collection>& training, const BuildParams& params) {
  validate(params);
  if (training.empty()) throw BuildError("build_model: empty training list");
  const int dimension = static_cast<int>(training.front().ensembles.at(0).descriptors.at(0).vector.size());
  for (const auto& c : training) validate(c, dimension);

  struct Outcome {
    std::vector<EquivalenceSet> sets;
    std::vector<std::string> warnings;
    std::size_t discarded = 0;
    bool skipped = false;
  };
  std::vector<Outcome> outcomes(training.size());

  parallel_for(training.size(), [&](std::size_t ci) {
    const Collection& col = training[ci];
    Outcome& o = outcomes[ci];
    if (col.ensembles.size() < 2 || !col.has_neutral()) {
      o.skipped = true;
      o.warnings.push_back("collection '" + col.subject +
                           (col.ensembles.size() < 2 ? "' has fewer than 2 ensembles"
                                                     : "' has no neutral ensemble"));
      return;
    }
    CollectionGraph graph;
    try {
      graph = build_collection_graph(col, params);
    } catch (const BuildError& e) {
      o.skipped = true;
      o.warnings.push_back(e.what());
      return;
    }
    for (auto& f : graph.failures) o.warnings.push_back("correspondence failed: " + f);

    std::unordered_map<DescriptorId, const Descriptor*> lookup;
    std::unordered_map<EnsembleId, bool> neutral;
    for (const auto& e : col.ensembles) {
      neutral[e.id] = e.expression.neutral();
      for (const auto& d : e.descriptors) lookup.emplace(d.id, &d);
    }
    const auto refined = refine_equivalence_sets(graph.components, col.ensembles.size(), params);
    o.discarded = refined.discarded;
    for (const auto& group : refined.groups) {
      std::vector<const Descriptor*> members;
      for (const auto id : group) members.push_back(lookup.at(id));
      members = one_per_ensemble(std::move(members));
      const auto bridging =
          choose_bridging(members, [&](const Descriptor& d) { return neutral.at(d.ensemble); });
      if (!bridging) {
        ++o.discarded;
        continue;
      }
      EquivalenceSet set;
      set.id = SetId{o.sets.size()};
      set.collection = col.id;
      for (const auto* m : members) set.members.push_back(m->id);
      set.bridging = *bridging;
      o.sets.push_back(std::move(set));
    }
    if (o.sets.empty()) {
      o.skipped = true;
      o.warnings.push_back("collection '" + col.subject + "' produced no equivalence sets");
    }
  });

  BuildReport report;
  std::vector<Collection> kept;
  std::vector<EquivalenceSet> sets;
  std::vector<CollectionSets> per_collection;
  std::vector<std::size_t> offsets;
  for (std::size_t ci = 0; ci < training.size(); ++ci) {
    auto& o = outcomes[ci];
    report.warnings.insert(report.warnings.end(), o.warnings.begin(), o.warnings.end());
    report.discarded_sets += o.discarded;
    if (o.skipped) {
      ++report.skipped_collections;
      continue;
    }
    kept.push_back(training[ci]);
  }
  if (kept.empty()) throw BuildError("build_model: no usable equivalence sets");

  // Global set numbering follows the training order.
  std::size_t k = 0;
  for (std::size_t ci = 0; ci < training.size(); ++ci) {
    auto& o = outcomes[ci];
    if (o.skipped) continue;
    offsets.push_back(sets.size());
    per_collection.push_back({&kept[k++], o.sets});
    for (auto& s : o.sets) {
      s.id = SetId{sets.size()};
      sets.push_back(std::move(s));
    }
  }

  std::vector<IrLink> links;
  if (per_collection.size() >= 2) {
    auto linked = link_collections(per_collection, offsets, params);
    links = std::move(linked.links);
    for (auto& f : linked.failures) report.warnings.push_back("collections left unlinked: " + f);
  }

  return {Model(dimension, std::move(kept), std::move(sets), std::move(links), params),
          std::move(report)};
}

}  // namespace eqgraph
