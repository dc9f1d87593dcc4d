import pytest

from vizplan.deployment import (CLIENT, CLOUD, SERVER, DeploymentModel, Link,
                                Site, default_deployment,
                                deployment_from_json, deployment_to_json,
                                fits, transfer_cost)


def lan(latency=5.0, bandwidth=1000.0):
    return DeploymentModel(
        sites=[Site(CLIENT, 10 ** 9), Site(SERVER, 10 ** 9), Site(CLOUD, None)],
        links=[Link(CLIENT, SERVER, latency, bandwidth),
               Link(SERVER, CLOUD, latency, bandwidth)])


class TestTransferCost:
    def test_zero_bytes_pays_latency_floor(self):
        assert transfer_cost(lan(), CLIENT, SERVER, 0) == 5.0

    def test_bandwidth_term(self):
        assert transfer_cost(lan(), CLIENT, SERVER, 10 ** 6) == \
            pytest.approx(5.0 + 10 ** 6 / 1000.0)

    def test_path_additivity(self):
        dm = lan()
        nbytes = 12345
        assert transfer_cost(dm, CLIENT, CLOUD, nbytes) == pytest.approx(
            transfer_cost(dm, CLIENT, SERVER, nbytes)
            + transfer_cost(dm, SERVER, CLOUD, nbytes))

    def test_monotone_in_bytes(self):
        dm = lan()
        costs = [transfer_cost(dm, SERVER, CLIENT, b)
                 for b in (0, 10, 1000, 10 ** 6)]
        assert costs == sorted(costs)

    def test_same_site_rejected(self):
        with pytest.raises(ValueError):
            transfer_cost(lan(), CLIENT, CLIENT, 1)


class TestFits:
    def test_empty_placement_fits(self):
        assert all(fits(lan(), {}).values())

    def test_over_budget(self):
        dm = DeploymentModel(
            sites=[Site(CLIENT, 1 * 1024 * 1024), Site(SERVER, 10 ** 9),
                   Site(CLOUD, None)],
            links=lan().links)
        out = fits(dm, {CLIENT: 2 * 1024 * 1024})
        assert out[CLIENT] is False
        assert out[SERVER] is True and out[CLOUD] is True

    def test_monotone_under_shrinking(self):
        dm = lan()
        big = fits(dm, {CLIENT: 10 ** 9, SERVER: 10 ** 9})
        small = fits(dm, {CLIENT: 10 ** 3, SERVER: 10 ** 3})
        for site in big:
            if big[site]:
                assert small[site]

    def test_unlimited_cloud(self):
        assert fits(lan(), {CLOUD: 10 ** 15})[CLOUD] is True


class TestModelInvariants:
    def test_all_three_sites_required(self):
        with pytest.raises(ValueError):
            DeploymentModel(sites=[Site(CLIENT, 1), Site(SERVER, 1)],
                            links=lan().links)

    def test_exact_links_required(self):
        with pytest.raises(ValueError):
            DeploymentModel(sites=lan().sites,
                            links=[Link(CLIENT, CLOUD, 1.0, 1.0),
                                   Link(SERVER, CLOUD, 1.0, 1.0)])

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            Site("edge", 1)
        with pytest.raises(ValueError):
            Site(CLIENT, -1)
        with pytest.raises(ValueError):
            Link(CLIENT, SERVER, -1.0, 5.0)
        with pytest.raises(ValueError):
            Link(CLIENT, SERVER, 1.0, 0.0)

    def test_json_round_trip(self):
        dm = default_deployment()
        assert deployment_from_json(deployment_to_json(dm)) == dm


class TestPlacementComparison:
    def test_client_replication_costs_more_client_bytes(self, congress_env,
                                                        dm, base_cal):
        """All per-chamber cubes at the client vs one cube at the server."""
        from vizplan.costmodel import plan_site_bytes
        from vizplan.physical import PhysicalPlan, StructureStrategy
        from vizplan.structures import match
        db, spec, stats = congress_env
        m = match("prefix_sum_cube", spec.view("member_votes").plan, stats)[0]
        client_replicated = PhysicalPlan([StructureStrategy(
            "member_votes", m, SERVER, CLIENT, CLIENT, replicate=True)])
        server_single = PhysicalPlan([StructureStrategy(
            "member_votes", m, SERVER, SERVER, SERVER, replicate=False)])
        b_client = plan_site_bytes(client_replicated, spec, dm, stats)
        b_server = plan_site_bytes(server_single, spec, dm, stats)
        assert b_client[CLIENT] > b_server[CLIENT]
        assert b_client[CLIENT] > 0
