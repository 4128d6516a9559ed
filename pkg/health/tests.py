from django.test import TestCase


class HealthViewTests(TestCase):
    def test_reports_database_and_plants(self):
        response = self.client.get("/health/")
        self.assertEqual(response.status_code, 200)
        data = response.json()
        self.assertTrue(data["ok"])
        self.assertTrue(data["db"]["reachable"])
        self.assertIn("mountain-car", data["plants"])
        self.assertIn("goto+battery", data["plants"])
