"""REST API over the analysis and the results store."""

import math
import os
import shutil
import tempfile
import unittest
from unittest import mock

from hmclab.api import create_api


class Test_API(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.api = create_api(os.path.join(self.temp_dir, 'api.db'))
        self.api.app.config['TESTING'] = True
        self.client = self.api.app.test_client()

    def tearDown(self):
        self.api.store.close()
        shutil.rmtree(self.temp_dir)

    def test_health(self):
        for path in ('/health', '/api/health'):
            response = self.client.get(path)
            self.assertEqual(response.status_code, 200)
            self.assertEqual(response.get_json()['status'], 'ok')

    def test_spectral_radius(self):
        response = self.client.post('/api/spectral-radius', json={'sigma': 1.0, 'T': math.pi / 2, 'eta': 0.5})
        self.assertEqual(response.status_code, 200)
        data = response.get_json()
        self.assertAlmostEqual(data['b'], 0.5)
        self.assertAlmostEqual(data['rho'], 0.25, places=7)

    def test_invalid_parameters(self):
        response = self.client.post('/api/spectral-radius', json={'sigma': 1.0, 'T': 1.0, 'eta': 1.0})
        self.assertEqual(response.status_code, 400)
        self.assertEqual(response.get_json()['status'], 'error')
        response = self.client.post('/api/spectral-radius', json={'sigma': 1.0, 'T': 'long', 'eta': 0.1})
        self.assertEqual(response.status_code, 400)
        response = self.client.post('/api/spectral-radius', data='not json', content_type='text/plain')
        self.assertEqual(response.status_code, 400)

    def test_worst_case_rate(self):
        response = self.client.post('/api/worst-case-rate',
                                    json={'eigenvalues': [1.0, 4.0], 'T': 0.5, 'eta': 0.0})
        self.assertAlmostEqual(response.get_json()['rate'], math.cos(0.5)**2)
        response = self.client.post('/api/worst-case-rate',
                                    json={'mu': 1.0, 'L': 100.0, 'T': 0.3, 'eta': 0.2, 'grid_points': 500,
                                          'measure': 'asymptotic'})
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.get_json()['measure'], 'asymptotic')
        response = self.client.post('/api/worst-case-rate', json={'mu': 1.0, 'L': 100.0, 'T': 0.3, 'eta': 0.2,
                                                                  'grid_points': 10**7})
        self.assertEqual(response.status_code, 400)

    def test_optimal_params(self):
        data = self.client.get('/api/optimal-params?variant=damped&mu=1&L=9').get_json()
        self.assertAlmostEqual(data['eta'], math.sqrt(2) - 1)
        data = self.client.get('/api/optimal-params?variant=coordinate&mu=4&L=16&d=2').get_json()
        self.assertEqual(data['rates'], [2.0, 8.0])
        response = self.client.get('/api/optimal-params?variant=langevin&mu=1&L=9')
        self.assertEqual(response.status_code, 400)

    def test_certificate_check(self):
        certificate = {'a': 1.0, 'b': 0.0, 'c': 1.0, 'r': 0.0, 'eta': 0.0,
                       'rates': {'kind': 'constant', 'value': 3.0}}
        response = self.client.post('/api/certificates/check', json={'mu': 1.0, 'L': 1.0, 'certificate': certificate})
        self.assertEqual(response.status_code, 200)
        self.assertTrue(response.get_json()['feasible'])
        response = self.client.post('/api/certificates/check', json={'mu': 1.0, 'L': 1.0, 'certificate': {'a': 1.0}})
        self.assertEqual(response.status_code, 400)

    def test_certificate_search(self):
        response = self.client.post('/api/certificates/search', json={
            'mu': 1.0, 'L': 10.0, 'rates': {'kind': 'constant', 'value': 2 * math.sqrt(11.0)}, 'grid_points': 100})
        self.assertEqual(response.status_code, 200)
        data = response.get_json()
        self.assertGreater(data['certificate']['r'], 0.0)
        self.assertTrue(data['check']['feasible'])
        self.assertGreater(data['time_to_accuracy'], 0.0)

    def test_certificate_search_without_horizon(self):
        # no refreshment certifies no contraction
        response = self.client.post('/api/certificates/search', json={
            'mu': 1.0, 'L': 10.0, 'rates': {'kind': 'constant', 'value': 0.0}, 'grid_points': 100})
        self.assertEqual(response.status_code, 200)
        self.assertNotIn(b'Infinity', response.data)
        self.assertIsNone(response.get_json()['time_to_accuracy'])
        # a positive rate with a degenerate metric has no finite horizon either
        with mock.patch('hmclab.analyze.w2_prefactor', return_value=math.inf):
            response = self.client.post('/api/certificates/search', json={
                'mu': 1.0, 'L': 10.0, 'rates': {'kind': 'constant', 'value': 2 * math.sqrt(11.0)}, 'grid_points': 100})
        self.assertGreater(response.get_json()['certificate']['r'], 0.0)
        self.assertNotIn(b'Infinity', response.data)
        self.assertIsNone(response.get_json()['time_to_accuracy'])

    def test_runs(self):
        run_id = self.api.store.save_run('sample', {'K': 5}, [{'algorithm': 'damped', 'seed': 0}])
        runs = self.client.get('/api/runs').get_json()['runs']
        self.assertEqual([r['id'] for r in runs], [run_id])
        run = self.client.get(f'/api/runs/{run_id}').get_json()['run']
        self.assertEqual(run['config'], {'K': 5})
        self.assertEqual(self.client.delete(f'/api/runs/{run_id}').status_code, 200)
        self.assertEqual(self.client.get(f'/api/runs/{run_id}').status_code, 404)
        self.assertEqual(self.client.get('/api/runs?limit=many').status_code, 400)

    def test_unknown_endpoint(self):
        response = self.client.get('/api/nothing')
        self.assertEqual(response.status_code, 404)
        self.assertEqual(response.get_json(), {'status': 'error',
                                               'message': 'no route /api/nothing; see /api/health for a liveness check'})
        response = self.client.get('/api/spectral-radius')
        self.assertEqual(response.status_code, 405)
        message = response.get_json()['message']
        self.assertTrue(message.startswith('/api/spectral-radius accepts '), message)
        self.assertIn('POST', message)
        self.assertTrue(message.endswith('not GET'), message)


if __name__ == '__main__':
    unittest.main()
